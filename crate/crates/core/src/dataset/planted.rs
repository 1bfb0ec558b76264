//! Synthetic planted-family datasets.
//!
//! Every family gets a base API sequence drawn from its own slice of a shared
//! API vocabulary, a base permission set drawn from a shared permission pool,
//! and family-prefixed activity and file names. Each sample is a mutated copy
//! of its family base.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Feature, Sample};
use crate::error::{Error, Result};

const API_CLASSES: &[&str] = &[
    "Landroid/telephony/SmsManager",
    "Landroid/telephony/TelephonyManager",
    "Landroid/content/Context",
    "Landroid/content/ContentResolver",
    "Landroid/content/pm/PackageManager",
    "Landroid/app/Activity",
    "Landroid/app/Service",
    "Landroid/app/AlarmManager",
    "Landroid/os/Handler",
    "Landroid/location/LocationManager",
    "Landroid/net/ConnectivityManager",
    "Landroid/webkit/WebView",
    "Landroid/database/sqlite/SQLiteDatabase",
    "Landroid/accounts/AccountManager",
    "Landroid/media/AudioRecord",
    "Ldalvik/system/DexClassLoader",
    "Ljava/io/File",
    "Ljava/io/FileOutputStream",
    "Ljava/net/URL",
    "Ljava/net/HttpURLConnection",
    "Ljava/lang/Runtime",
    "Ljava/lang/reflect/Method",
    "Ljavax/crypto/Cipher",
    "Ljava/util/zip/ZipFile",
];

const API_METHODS: &[&str] = &[
    "sendTextMessage",
    "getDeviceId",
    "getSubscriberId",
    "getLine1Number",
    "query",
    "insert",
    "delete",
    "update",
    "openConnection",
    "connect",
    "getInputStream",
    "getOutputStream",
    "write",
    "read",
    "close",
    "exec",
    "invoke",
    "loadClass",
    "getInstance",
    "doFinal",
    "init",
    "startService",
    "registerReceiver",
    "getSystemService",
    "getLastKnownLocation",
    "loadUrl",
    "set",
    "postDelayed",
    "getAccounts",
    "startRecording",
];

const PERMISSIONS: &[&str] = &[
    "android.permission.INTERNET",
    "android.permission.READ_PHONE_STATE",
    "android.permission.SEND_SMS",
    "android.permission.RECEIVE_SMS",
    "android.permission.READ_SMS",
    "android.permission.WRITE_SMS",
    "android.permission.READ_CONTACTS",
    "android.permission.WRITE_CONTACTS",
    "android.permission.ACCESS_FINE_LOCATION",
    "android.permission.ACCESS_COARSE_LOCATION",
    "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.ACCESS_WIFI_STATE",
    "android.permission.CHANGE_WIFI_STATE",
    "android.permission.CALL_PHONE",
    "android.permission.PROCESS_OUTGOING_CALLS",
    "android.permission.READ_CALL_LOG",
    "android.permission.WRITE_CALL_LOG",
    "android.permission.RECORD_AUDIO",
    "android.permission.CAMERA",
    "android.permission.WRITE_EXTERNAL_STORAGE",
    "android.permission.READ_EXTERNAL_STORAGE",
    "android.permission.RECEIVE_BOOT_COMPLETED",
    "android.permission.WAKE_LOCK",
    "android.permission.VIBRATE",
    "android.permission.GET_TASKS",
    "android.permission.KILL_BACKGROUND_PROCESSES",
    "android.permission.SYSTEM_ALERT_WINDOW",
    "android.permission.GET_ACCOUNTS",
    "android.permission.MOUNT_UNMOUNT_FILESYSTEMS",
    "android.permission.INSTALL_PACKAGES",
    "android.permission.DELETE_PACKAGES",
    "android.permission.WRITE_SETTINGS",
    "android.permission.READ_SETTINGS",
    "android.permission.BLUETOOTH",
    "android.permission.NFC",
    "android.permission.DISABLE_KEYGUARD",
    "android.permission.CHANGE_NETWORK_STATE",
    "android.permission.MODIFY_PHONE_STATE",
    "android.permission.BIND_DEVICE_ADMIN",
    "android.permission.USE_CREDENTIALS",
];

const WORDS: &[&str] = &[
    "main", "login", "bank", "update", "setting", "splash", "pay", "card", "secure", "verify",
    "service", "alert", "notice", "account", "sms", "sync", "player", "viewer", "browser",
    "wallet",
];

const FILE_DIRS: &[&str] = &[
    "res/layout",
    "res/drawable",
    "res/raw",
    "assets",
    "res/xml",
    "lib",
];
const FILE_EXTS: &[&str] = &["xml", "png", "dex", "so", "html", "json"];

/// Parameters of [`generate_planted`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub families: usize,
    pub per_family: usize,
    pub mutation_rate: f64,
    pub seed: u64,
    /// Feature replaced by per-sample random values carrying no family signal.
    pub noise_feature: Option<Feature>,
}

impl PlantedConfig {
    pub fn new(families: usize, per_family: usize, mutation_rate: f64, seed: u64) -> Self {
        PlantedConfig {
            families,
            per_family,
            mutation_rate,
            seed,
            noise_feature: None,
        }
    }

    pub fn with_noise(mut self, feature: Feature) -> Self {
        self.noise_feature = Some(feature);
        self
    }
}

struct FamilyBase {
    name: String,
    tag: String,
    api: Vec<String>,
    permissions: Vec<String>,
    activities: Vec<String>,
    files: Vec<String>,
}

fn api_vocabulary() -> Vec<String> {
    API_CLASSES
        .iter()
        .flat_map(|c| API_METHODS.iter().map(move |m| format!("{c};->{m}")))
        .collect()
}

fn activity_name(tag: &str, rng: &mut ChaCha8Rng) -> String {
    let word = WORDS.choose(rng).unwrap();
    let mut cap = word.to_string();
    cap[..1].make_ascii_uppercase();
    format!("com.{tag}.{word}.{cap}Activity{}", rng.gen_range(0..10_000))
}

fn file_name(tag: &str, rng: &mut ChaCha8Rng) -> String {
    let dir = FILE_DIRS.choose(rng).unwrap();
    let ext = FILE_EXTS.choose(rng).unwrap();
    let word = WORDS.choose(rng).unwrap();
    format!("{dir}/{tag}_{word}_{}.{ext}", rng.gen_range(0..100_000))
}

fn distinct<F: FnMut(&mut ChaCha8Rng) -> String>(
    count: usize,
    rng: &mut ChaCha8Rng,
    mut make: F,
) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = make(rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn family_base(index: usize, vocab: &[String], rng: &mut ChaCha8Rng) -> FamilyBase {
    let tag: String = (0..6).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
    let slice: Vec<&String> = vocab.choose_multiple(rng, 40).collect();
    let len = rng.gen_range(200..=400);
    let api = (0..len)
        .map(|_| (*slice.choose(rng).unwrap()).clone())
        .collect();
    let n_perm = rng.gen_range(8..=14);
    let permissions = PERMISSIONS
        .choose_multiple(rng, n_perm)
        .map(|p| p.to_string())
        .collect();
    let n_act = rng.gen_range(6..=12);
    let activities = distinct(n_act, rng, |r| activity_name(&tag, r));
    let n_files = rng.gen_range(15..=30);
    let files = distinct(n_files, rng, |r| file_name(&tag, r));
    FamilyBase {
        name: format!("family{index:02}"),
        tag,
        api,
        permissions,
        activities,
        files,
    }
}

/// Per-token mutation: with probability `rate` the token is either replaced
/// or preceded by a random vocabulary token (equal odds).
fn mutate_sequence(
    base: &[String],
    rate: f64,
    vocab: &[String],
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    if rate == 0.0 {
        return base.to_vec();
    }
    let mut out = Vec::with_capacity(base.len() + base.len() / 8);
    for tok in base {
        let u: f64 = rng.gen();
        if u < rate / 2.0 {
            out.push(vocab.choose(rng).unwrap().clone());
        } else if u < rate {
            out.push(vocab.choose(rng).unwrap().clone());
            out.push(tok.clone());
        } else {
            out.push(tok.clone());
        }
    }
    out
}

/// Set analogue of [`mutate_sequence`]: an affected element is either
/// replaced by a fresh one or kept alongside a fresh one.
fn mutate_set<F: FnMut(&mut ChaCha8Rng) -> String>(
    base: &[String],
    rate: f64,
    rng: &mut ChaCha8Rng,
    mut fresh: F,
) -> BTreeSet<String> {
    if rate == 0.0 {
        return base.iter().cloned().collect();
    }
    let mut out = BTreeSet::new();
    for item in base {
        let u: f64 = rng.gen();
        if u < rate / 2.0 {
            out.insert(fresh(rng));
        } else if u < rate {
            out.insert(fresh(rng));
            out.insert(item.clone());
        } else {
            out.insert(item.clone());
        }
    }
    out
}

fn noise_sample(feature: Feature, sample: &mut Sample, vocab: &[String], rng: &mut ChaCha8Rng) {
    match feature {
        Feature::Api => {
            let len = rng.gen_range(200..=400);
            sample.api_sequence = (0..len)
                .map(|_| vocab.choose(rng).unwrap().clone())
                .collect();
        }
        Feature::Permission => {
            let n = rng.gen_range(8..=14);
            sample.permissions = PERMISSIONS
                .choose_multiple(rng, n)
                .map(|p| p.to_string())
                .collect();
        }
        Feature::Activity => {
            let n = rng.gen_range(6..=12);
            sample.activity_names = distinct(n, rng, |r| activity_name("noise", r))
                .into_iter()
                .collect();
        }
        Feature::File => {
            let n = rng.gen_range(15..=30);
            sample.file_names = distinct(n, rng, |r| file_name("noise", r))
                .into_iter()
                .collect();
        }
    }
}

/// Generates `families × per_family` labeled samples; a pure function of `cfg`.
pub fn generate_planted(cfg: &PlantedConfig) -> Result<Dataset> {
    if cfg.families == 0 || cfg.per_family == 0 {
        return Err(Error::InvalidConfig(
            "families and per_family must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.mutation_rate) {
        return Err(Error::InvalidConfig(format!(
            "mutation rate {} is outside [0, 1]",
            cfg.mutation_rate
        )));
    }
    let vocab = api_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bases: Vec<FamilyBase> = (0..cfg.families)
        .map(|f| family_base(f, &vocab, &mut rng))
        .collect();

    let rate = cfg.mutation_rate;
    let mut samples = Vec::with_capacity(cfg.families * cfg.per_family);
    for base in &bases {
        for k in 0..cfg.per_family {
            let tag = base.tag.as_str();
            let mut sample = Sample {
                id: format!("{}-{k:04}", base.name),
                family: Some(base.name.clone()),
                api_sequence: mutate_sequence(&base.api, rate, &vocab, &mut rng),
                permissions: mutate_set(&base.permissions, rate, &mut rng, |r| {
                    PERMISSIONS.choose(r).unwrap().to_string()
                }),
                activity_names: mutate_set(&base.activities, rate, &mut rng, |r| {
                    activity_name(tag, r)
                }),
                file_names: mutate_set(&base.files, rate, &mut rng, |r| file_name(tag, r)),
            };
            if let Some(feature) = cfg.noise_feature {
                noise_sample(feature, &mut sample, &vocab, &mut rng);
            }
            samples.push(sample);
        }
    }
    Dataset::new(samples)
}
