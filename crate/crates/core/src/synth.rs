//! Seeded generator of themed synthetic apps and their obfuscated pairs.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::features::{InstructionVocabulary, OpcodeGroup};
use crate::ingest::opcodes::{self, from_mnemonic};
use crate::ingest::{AppModel, CallKind, CallSite, ClassModel, MethodModel, Provenance, RawOpcode};
use crate::obfuscate::{obfuscate, ObfuscationConfig, ObfuscationError, TransformLog};
use crate::seed::rng_for;

use OpcodeGroup as G;

struct Theme {
    name: &'static str,
    apis: &'static [&'static str],
    groups: &'static [(OpcodeGroup, f64)],
    words: &'static [&'static str],
}

const COMMON_APIS: &[&str] = &[
    "java/lang/String",
    "java/lang/StringBuilder",
    "java/util/ArrayList",
    "java/util/HashMap",
    "android/util/Log",
    "java/lang/Integer",
    "android/os/Bundle",
    "android/content/Context",
];

const THEMES: &[Theme] = &[
    Theme {
        name: "game",
        apis: &[
            "android/opengl/GLES20", "android/opengl/GLSurfaceView", "android/view/MotionEvent",
            "android/graphics/Canvas", "android/graphics/Paint", "android/media/SoundPool",
            "java/util/Random", "java/lang/Math", "android/os/SystemClock", "java/nio/FloatBuffer",
        ],
        groups: &[(G::XAdd, 3.0), (G::XMul, 3.0), (G::XSub, 2.0), (G::XComp, 2.0), (G::IfXXX, 3.0), (G::XAload, 2.0), (G::XNeg, 1.0)],
        words: &["game", "arcade", "level", "score", "player", "puzzle", "sprite", "libgdx"],
    },
    Theme {
        name: "network",
        apis: &[
            "java/net/URL", "java/net/HttpURLConnection", "java/net/Socket", "java/io/InputStream",
            "java/io/BufferedReader", "java/io/InputStreamReader", "android/net/ConnectivityManager",
            "org/apache/http/client", "java/net/URLEncoder", "android/net/Uri",
        ],
        groups: &[(G::IfXXX, 3.0), (G::XAload, 1.0), (G::XAdd, 1.0), (G::XSwitch, 1.0)],
        words: &["network", "download", "http", "client", "server", "browser", "proxy"],
    },
    Theme {
        name: "media",
        apis: &[
            "android/media/MediaPlayer", "android/media/AudioManager", "android/media/AudioTrack",
            "android/media/MediaRecorder", "android/provider/MediaStore", "android/widget/SeekBar",
            "android/graphics/Bitmap", "android/graphics/BitmapFactory", "java/io/File",
        ],
        groups: &[(G::XMul, 2.0), (G::XDiv, 2.0), (G::XShift, 2.0), (G::XAload, 3.0), (G::XAstore, 2.0), (G::IfXXX, 2.0)],
        words: &["music", "player", "audio", "video", "playlist", "podcast", "radio"],
    },
    Theme {
        name: "crypto",
        apis: &[
            "javax/crypto/Cipher", "javax/crypto/spec", "java/security/MessageDigest",
            "java/security/SecureRandom", "java/security/KeyStore", "android/util/Base64",
            "java/math/BigInteger", "java/nio/charset",
        ],
        groups: &[(G::XXor, 4.0), (G::XShift, 4.0), (G::XAnd, 3.0), (G::XOr, 2.0), (G::XAload, 3.0), (G::XAstore, 3.0), (G::ArrayLength, 2.0), (G::Iinc, 2.0)],
        words: &["password", "encryption", "vault", "secure", "keys", "privacy", "otp"],
    },
    Theme {
        name: "database",
        apis: &[
            "android/database/Cursor", "android/database/sqlite/SQLiteDatabase",
            "android/database/sqlite/SQLiteOpenHelper", "android/content/ContentValues",
            "android/content/ContentResolver", "java/sql", "android/widget/ListView", "android/widget/ArrayAdapter",
        ],
        groups: &[(G::IfXXX, 3.0), (G::XAdd, 1.0), (G::XComp, 1.0), (G::Iinc, 1.0)],
        words: &["notes", "todo", "database", "records", "inventory", "diary", "tasks"],
    },
    Theme {
        name: "text",
        apis: &[
            "android/text/TextUtils", "android/text/Html", "android/text/Editable", "android/widget/EditText",
            "android/widget/TextView", "java/util/regex", "java/lang/StringBuffer", "java/lang/Character",
            "android/view/inputmethod",
        ],
        groups: &[(G::XAload, 3.0), (G::IfXXX, 3.0), (G::XSwitch, 2.0), (G::XComp, 1.0), (G::Iinc, 2.0), (G::ArrayLength, 1.0)],
        words: &["editor", "text", "keyboard", "dictionary", "reader", "markdown", "words"],
    },
    Theme {
        name: "sensors",
        apis: &[
            "android/hardware/Sensor", "android/hardware/SensorManager", "android/hardware/SensorEvent",
            "android/location/Location", "android/location/LocationManager", "android/hardware/Camera",
            "android/os/Vibrator", "android/bluetooth",
        ],
        groups: &[(G::XMul, 3.0), (G::XDiv, 3.0), (G::XSub, 3.0), (G::XComp, 3.0), (G::XNeg, 2.0), (G::IfXXX, 2.0)],
        words: &["compass", "gps", "tracker", "sensor", "fitness", "altitude", "steps"],
    },
    Theme {
        name: "finance",
        apis: &[
            "java/math/BigDecimal", "java/text/DecimalFormat", "java/text/NumberFormat",
            "java/text/SimpleDateFormat", "java/util/Calendar", "java/util/Date", "java/lang/Double",
            "android/content/SharedPreferences",
        ],
        groups: &[(G::XMul, 3.0), (G::XDiv, 3.0), (G::XAdd, 3.0), (G::XRem, 2.0), (G::XComp, 2.0), (G::IfXXX, 1.0)],
        words: &["budget", "expense", "currency", "loan", "calculator", "finance", "wallet"],
    },
    Theme {
        name: "messaging",
        apis: &[
            "android/telephony/SmsManager", "android/telephony/TelephonyManager",
            "android/provider/ContactsContract", "android/app/NotificationManager", "android/app/Notification",
            "android/app/PendingIntent", "android/content/Intent", "org/json/JSONObject",
        ],
        groups: &[(G::IfXXX, 2.0), (G::XSwitch, 2.0), (G::XAdd, 1.0), (G::XAload, 1.0)],
        words: &["chat", "sms", "messenger", "contacts", "inbox", "notification", "social"],
    },
    Theme {
        name: "utilities",
        apis: &[
            "android/os/Environment", "java/io/FileInputStream", "java/io/FileOutputStream",
            "java/util/zip", "android/os/PowerManager", "android/net/wifi", "android/content/pm",
            "android/app/AlarmManager", "android/provider/Settings",
        ],
        groups: &[(G::IfXXX, 2.0), (G::XAdd, 1.0), (G::XShift, 1.0), (G::XAnd, 1.0), (G::Iinc, 1.0), (G::ArrayLength, 1.0)],
        words: &["battery", "files", "cleaner", "flashlight", "alarm", "backup", "wifi"],
    },
];

const FILLER: &[&str] = &[
    "aload_0", "aload_1", "iload_1", "iload_2", "istore_3", "astore_2", "dup", "pop", "iconst_1",
    "bipush", "getfield", "putfield", "new", "checkcast", "ldc",
];
const METHOD_NAMES: &[&str] = &[
    "onCreate", "run", "update", "load", "save", "render", "handle", "process", "init", "compute",
    "draw", "parse", "refresh", "apply",
];
const API_METHOD_NAMES: &[&str] = &["get", "set", "open", "close", "read", "write", "create", "start", "update"];
const DESCRIPTORS: &[&str] = &["()V", "(I)I", "(Ljava/lang/String;)V", "([B)[B", "(II)Z", "()Ljava/lang/String;"];

pub fn theme_names() -> Vec<&'static str> {
    THEMES.iter().map(|t| t.name).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub obfuscation: ObfuscationConfig,
    /// Inclusive range of classes per app.
    pub classes: (usize, usize),
    /// Inclusive range of methods per class.
    pub methods_per_class: (usize, usize),
    /// Inclusive range of tracked instructions per method.
    pub method_length: (usize, usize),
    /// Share of tracked instructions that are API calls.
    pub api_fraction: f64,
    /// Share of instructions drawn from a second theme.
    pub theme_mix: f64,
    /// Chance that a tracked instruction is followed by a call into the app.
    pub internal_call_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            obfuscation: ObfuscationConfig::default(),
            classes: (2, 8),
            methods_per_class: (2, 7),
            method_length: (2, 10),
            api_fraction: 0.3,
            theme_mix: 0.2,
            internal_call_rate: 0.08,
        }
    }
}

/// An original app, its obfuscated counterpart and what was done to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub original: AppModel,
    pub obfuscated: AppModel,
    pub log: TransformLog,
    pub theme: &'static str,
}

/// Id given to the obfuscated counterpart of `app_id`.
pub fn obfuscated_id(app_id: &str) -> String {
    format!("{app_id}-ob")
}

fn weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [(T, f64)]) -> &'a T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (item, w) in items {
        if x < *w {
            return item;
        }
        x -= w;
    }
    &items.last().expect("non-empty").0
}

fn group_opcodes(group: OpcodeGroup) -> Vec<RawOpcode> {
    (0..=opcodes::LAST_OPCODE)
        .filter(|&op| OpcodeGroup::of(op) == Some(group))
        .collect()
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

/// Per-app emphasis: theme weights scaled by independent exponential draws.
struct Profile {
    apis: Vec<(&'static str, f64)>,
    groups: Vec<(OpcodeGroup, f64)>,
    secondary_apis: Vec<(&'static str, f64)>,
    secondary_groups: Vec<(OpcodeGroup, f64)>,
}

impl Profile {
    fn new(rng: &mut ChaCha8Rng, theme: &Theme, secondary: &Theme) -> Self {
        let mut jitter = |w: f64| -> f64 { let e: f64 = Exp1.sample(rng);
            w * e };
        let mut apis: Vec<(&str, f64)> = theme.apis.iter().map(|a| (*a, jitter(3.0))).collect();
        apis.extend(COMMON_APIS.iter().map(|a| (*a, jitter(1.0))));
        let groups = theme.groups.iter().map(|(g, w)| (*g, jitter(*w))).collect();
        let secondary_apis = secondary.apis.iter().map(|a| (*a, jitter(1.0))).collect();
        let secondary_groups = secondary.groups.iter().map(|(g, w)| (*g, jitter(*w))).collect();
        Profile {
            apis,
            groups,
            secondary_apis,
            secondary_groups,
        }
    }
}

fn describe(rng: &mut ChaCha8Rng, theme: &Theme, secondary: &Theme) -> String {
    let mut words: Vec<&str> = theme.words.choose_multiple(rng, 4).copied().collect();
    words.extend(secondary.words.choose(rng));
    format!(
        "A {} app with {} and {} features. Includes {} support and {} tools.",
        words[0], words[1], words[2], words[3], words[4]
    )
}

/// Generates one un-obfuscated app.
pub fn generate_app(index: usize, config: &SynthConfig, vocab: &InstructionVocabulary) -> (AppModel, &'static str) {
    let mut rng = rng_for(config.seed, &["app", &index.to_string()]);
    let theme = &THEMES[rng.random_range(0..THEMES.len())];
    let secondary = &THEMES[rng.random_range(0..THEMES.len())];
    let profile = Profile::new(&mut rng, theme, secondary);
    let app_id = format!("app{index:04}");
    let mut app = AppModel::new(app_id.clone(), Provenance::Synthetic);
    app.description = Some(describe(&mut rng, theme, secondary));

    // skeleton first so bodies can call any method of the app
    let class_count = range(&mut rng, config.classes);
    for c in 0..class_count {
        let word = theme.words.choose(&mut rng).expect("theme words");
        let mut class = ClassModel::new(format!("synth/{app_id}/{}{c}", capitalize(word)));
        if c > 0 && rng.random_bool(0.2) {
            class.super_name = Some(app.classes[0].class_name.clone());
        }
        let method_count = range(&mut rng, config.methods_per_class);
        for m in 0..method_count {
            let name = format!("{}{m}", METHOD_NAMES.choose(&mut rng).expect("names"));
            let descriptor = DESCRIPTORS.choose(&mut rng).expect("descriptors");
            class.methods.push(MethodModel::new(name, *descriptor));
        }
        app.classes.push(class);
    }
    let targets: Vec<CallSite> = app
        .classes
        .iter()
        .flat_map(|c| {
            c.methods.iter().map(|m| CallSite {
                owner: c.class_name.clone(),
                name: m.name.clone(),
                descriptor: m.descriptor.clone(),
                kind: CallKind::Virtual,
            })
        })
        .collect();

    let filler: Vec<RawOpcode> = FILLER.iter().map(|m| from_mnemonic(m).expect("filler mnemonic")).collect();
    let ret = from_mnemonic("return").expect("return");
    for ci in 0..app.classes.len() {
        for mi in 0..app.classes[ci].methods.len() {
            let mut body = MethodModel::new("", "");
            let length = range(&mut rng, config.method_length);
            for _ in 0..length {
                for _ in 0..rng.random_range(0..3usize) {
                    body.push_opcode(*filler.choose(&mut rng).expect("filler"));
                }
                let from_secondary = rng.random_bool(config.theme_mix);
                if rng.random_bool(config.api_fraction) {
                    let pool = if from_secondary { &profile.secondary_apis } else { &profile.apis };
                    let owner = *weighted(&mut rng, pool);
                    debug_assert!(vocab.api_slot(owner).is_some(), "{owner} is not in the vocabulary");
                    body.push_call(CallSite {
                        owner: owner.to_string(),
                        name: API_METHOD_NAMES.choose(&mut rng).expect("api names").to_string(),
                        descriptor: "()V".into(),
                        kind: CallKind::Virtual,
                    });
                } else {
                    let pool = if from_secondary { &profile.secondary_groups } else { &profile.groups };
                    let group = *weighted(&mut rng, pool);
                    let ops = group_opcodes(group);
                    body.push_opcode(*ops.choose(&mut rng).expect("group has opcodes"));
                }
                if rng.random_bool(config.internal_call_rate) {
                    let target = targets.choose(&mut rng).expect("app has methods").clone();
                    body.push_call(target);
                }
            }
            body.push_opcode(ret);
            let method = &mut app.classes[ci].methods[mi];
            method.opcodes = body.opcodes;
            method.call_sites = body.call_sites;
            method.string_constant_count = if rng.random_bool(0.5) { rng.random_range(1..=3) } else { 0 };
        }
    }
    (app, theme.name)
}

/// Generates `count` apps and obfuscates each one.
pub fn generate_corpus(
    count: usize,
    config: &SynthConfig,
    vocab: &InstructionVocabulary,
) -> Result<Vec<SynthPair>, ObfuscationError> {
    config.obfuscation.validate()?;
    (0..count)
        .map(|i| {
            let (original, theme) = generate_app(i, config, vocab);
            let (mut obfuscated, log) = obfuscate(&original, &config.obfuscation, vocab)?;
            obfuscated.app_id = obfuscated_id(&original.app_id);
            obfuscated.description = None;
            Ok(SynthPair {
                original,
                obfuscated,
                log,
                theme,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_app, EntryPolicy};

    #[test]
    fn theme_apis_are_in_the_vocabulary() {
        let v = InstructionVocabulary::default_vocabulary();
        for t in THEMES {
            for a in t.apis.iter().chain(COMMON_APIS) {
                assert!(v.api_slot(a).is_some(), "{a}");
            }
            assert!(t.words.len() >= 4);
        }
        assert_eq!(THEMES.len(), 10);
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let v = InstructionVocabulary::default_vocabulary();
        let config = SynthConfig::default();
        let a = generate_corpus(5, &config, &v).unwrap();
        let b = generate_corpus(5, &config, &v).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.original.classes.len() >= 2 && p.original.classes.len() <= 8);
            assert_eq!(p.obfuscated.pair_of.as_deref(), Some(p.original.app_id.as_str()));
            assert!(p.original.methods().all(|(_, m)| m.call_sites_consistent()));
            assert!(!extract_app(&p.original, &v, EntryPolicy::AllMethods).is_zero());
            assert!(p.original.classes.iter().all(|c| v.api_slot(&c.class_name).is_none()));
        }
        assert!(generate_corpus(0, &config, &v).unwrap().is_empty());
    }

    #[test]
    fn seeds_change_the_corpus() {
        let v = InstructionVocabulary::default_vocabulary();
        let a = generate_app(0, &SynthConfig::default(), &v).0;
        let b = generate_app(0, &SynthConfig { seed: 1, ..Default::default() }, &v).0;
        assert_ne!(a, b);
    }
}
