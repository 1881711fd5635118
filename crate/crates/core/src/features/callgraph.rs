//! Class-hierarchy call graph over the methods of one app.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::vocab::InstructionVocabulary;
use crate::ingest::{AppModel, CallKind, CallSite};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodRef {
    pub class: String,
    pub name: String,
    pub descriptor: String,
}

impl std::fmt::Display for MethodRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}{}", self.class, self.name, self.descriptor)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryPolicy {
    /// Every method is an entry point.
    #[default]
    AllMethods,
    /// Only methods with the `public` access flag.
    PublicOnly,
}

/// A call that is neither an API call nor resolvable inside the app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingRef {
    pub caller: usize,
    pub site: CallSite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    /// Nodes in app order: class order, then method order.
    pub nodes: Vec<MethodRef>,
    /// `node -> (class index, method index)` in the source app.
    pub locations: Vec<(usize, usize)>,
    pub edges: BTreeSet<(usize, usize)>,
    pub entry_points: BTreeSet<usize>,
    pub dangling: Vec<DanglingRef>,
}

struct Hierarchy<'a> {
    app: &'a AppModel,
    class_index: HashMap<&'a str, usize>,
    /// direct subclasses and implementors, by class index
    subtypes: Vec<Vec<usize>>,
    node_of: HashMap<(usize, &'a str, &'a str), usize>,
}

impl<'a> Hierarchy<'a> {
    fn new(app: &'a AppModel) -> Self {
        let class_index: HashMap<&str, usize> = app
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.class_name.as_str(), i))
            .collect();
        let mut subtypes = vec![Vec::new(); app.classes.len()];
        for (i, c) in app.classes.iter().enumerate() {
            for sup in c.super_name.iter().chain(&c.interfaces) {
                if let Some(&s) = class_index.get(sup.as_str()) {
                    if s != i {
                        subtypes[s].push(i);
                    }
                }
            }
        }
        let mut node_of = HashMap::new();
        let mut n = 0;
        for (ci, c) in app.classes.iter().enumerate() {
            for m in &c.methods {
                node_of.insert((ci, m.name.as_str(), m.descriptor.as_str()), n);
                n += 1;
            }
        }
        Hierarchy {
            app,
            class_index,
            subtypes,
            node_of,
        }
    }

    /// Walks super classes, then super interfaces, for the first declaration.
    fn resolve_declared(&self, owner: usize, name: &str, desc: &str) -> Option<usize> {
        let mut seen = vec![false; self.app.classes.len()];
        let mut cur = Some(owner);
        while let Some(ci) = cur {
            if std::mem::replace(&mut seen[ci], true) {
                break;
            }
            if let Some(&node) = self.node_of.get(&(ci, name, desc)) {
                return Some(node);
            }
            cur = self.app.classes[ci]
                .super_name
                .as_deref()
                .and_then(|s| self.class_index.get(s).copied());
        }
        // default methods on interfaces
        let mut seen = vec![false; self.app.classes.len()];
        let mut queue = VecDeque::from([owner]);
        while let Some(ci) = queue.pop_front() {
            if std::mem::replace(&mut seen[ci], true) {
                continue;
            }
            let class = &self.app.classes[ci];
            if ci != owner {
                if let Some(&node) = self.node_of.get(&(ci, name, desc)) {
                    return Some(node);
                }
            }
            for sup in class.super_name.iter().chain(&class.interfaces) {
                if let Some(&s) = self.class_index.get(sup.as_str()) {
                    queue.push_back(s);
                }
            }
        }
        None
    }

    /// All transitive subtypes of `owner`, excluding `owner`.
    fn subtypes_of(&self, owner: usize) -> Vec<usize> {
        let mut seen = vec![false; self.app.classes.len()];
        seen[owner] = true;
        let mut out = Vec::new();
        let mut queue: VecDeque<usize> = self.subtypes[owner].iter().copied().collect();
        while let Some(ci) = queue.pop_front() {
            if std::mem::replace(&mut seen[ci], true) {
                continue;
            }
            out.push(ci);
            queue.extend(self.subtypes[ci].iter().copied());
        }
        out.sort_unstable();
        out
    }

    fn targets(&self, site: &CallSite) -> Option<Vec<usize>> {
        let owner = *self.class_index.get(site.owner.as_str())?;
        let name = site.name.as_str();
        let desc = site.descriptor.as_str();
        let mut targets: Vec<usize> = self.resolve_declared(owner, name, desc).into_iter().collect();
        if matches!(site.kind, CallKind::Virtual | CallKind::Interface) {
            for sub in self.subtypes_of(owner) {
                if let Some(&node) = self.node_of.get(&(sub, name, desc)) {
                    targets.push(node);
                }
            }
        }
        targets.sort_unstable();
        targets.dedup();
        (!targets.is_empty()).then_some(targets)
    }
}

/// Builds the call graph using class-hierarchy analysis. API calls produce
/// no edges (they are counted as instructions); `invokedynamic` sites are
/// skipped; anything else that does not resolve is recorded as dangling.
pub fn build_call_graph(
    app: &AppModel,
    vocab: &InstructionVocabulary,
    policy: EntryPolicy,
) -> CallGraph {
    let hierarchy = Hierarchy::new(app);
    let mut nodes = Vec::with_capacity(app.method_count());
    let mut locations = Vec::with_capacity(app.method_count());
    let mut entry_points = BTreeSet::new();
    for (ci, class) in app.classes.iter().enumerate() {
        for (mi, m) in class.methods.iter().enumerate() {
            let id = nodes.len();
            nodes.push(MethodRef {
                class: class.class_name.clone(),
                name: m.name.clone(),
                descriptor: m.descriptor.clone(),
            });
            locations.push((ci, mi));
            let is_entry = match policy {
                EntryPolicy::AllMethods => true,
                EntryPolicy::PublicOnly => m.is_public(),
            };
            if is_entry {
                entry_points.insert(id);
            }
        }
    }

    let mut edges = BTreeSet::new();
    let mut dangling = Vec::new();
    for (caller, &(ci, mi)) in locations.iter().enumerate() {
        for site in &app.classes[ci].methods[mi].call_sites {
            if site.kind == CallKind::Dynamic || vocab.api_slot(&site.owner).is_some() {
                continue;
            }
            match hierarchy.targets(site) {
                Some(targets) => edges.extend(targets.into_iter().map(|t| (caller, t))),
                None => dangling.push(DanglingRef {
                    caller,
                    site: site.clone(),
                }),
            }
        }
    }

    CallGraph {
        nodes,
        locations,
        edges,
        entry_points,
        dangling,
    }
}

impl CallGraph {
    pub fn node(&self, r: &MethodRef) -> Option<usize> {
        self.nodes.iter().position(|n| n == r)
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((node, 0)..(node + 1, 0))
            .map(|&(_, to)| to)
    }

    /// Nodes reachable from the entry points (entry points included).
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = self.entry_points.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n) {
                continue;
            }
            queue.extend(self.successors(n).filter(|s| !seen.contains(s)));
        }
        seen
    }
}
