//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::equilibria::{maxwellian_generator, power_generator, EntropyGenerator};
use crate::error::{Error, Result};
use crate::phase_space::{ModelVariant, PhaseGrid};

pub const DEFAULT_SNAPSHOT_STRIDE: usize = 8;

/// Initial distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum F0Spec {
    UniformMaxwellian { nbar: f64 },
    ModulatedMaxwellian { nbar: f64, eps: f64, mode: usize },
    TwoStream { nbar: f64, v0: f64, eps: f64, mode: usize },
    Vacuum,
}

/// Background density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextSpec {
    Uniform { nbar: f64 },
    /// `nbar (1 + eps cos(2 pi mode x / L))`
    Cosine { nbar: f64, eps: f64, mode: usize },
    /// Density of `f0`.
    MatchF0,
    Zero,
}

/// `amplitude * sin(2 pi mode x / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpec {
    pub amplitude: f64,
    pub mode: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Maxwellian,
    Power(f64),
}

impl SigmaSpec {
    pub fn generator(&self) -> Result<EntropyGenerator<f64>> {
        match *self {
            SigmaSpec::Maxwellian => Ok(maxwellian_generator()),
            SigmaSpec::Power(q) => power_generator(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelVariant,
    pub length: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
    pub nt_per_window: usize,
    pub window_length: f64,
    pub t_end: f64,
    pub tol_fp: f64,
    pub max_iters: usize,
    pub f0: F0Spec,
    pub n_ext: NextSpec,
    pub a0: WaveSpec,
    pub adot0: WaveSpec,
    pub sigma: SigmaSpec,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
}

const KEYS: [&str; 17] = [
    "model",
    "L",
    "p_max",
    "nx",
    "np",
    "nt_per_window",
    "window_length",
    "t_end",
    "tol_fp",
    "max_iters",
    "f0",
    "n_ext",
    "A0",
    "Adot0",
    "sigma",
    "output_dir",
    "snapshot_stride",
];

fn err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Number, optionally followed by `pi` (`2pi`, `pi`, `0.5pi`).
fn parse_f64(v: &str) -> Option<f64> {
    let v = v.trim();
    if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(factor * std::f64::consts::PI);
    }
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// `name(a, b, ...)` or bare `name`.
fn call(v: &str) -> Option<(&str, Vec<&str>)> {
    let v = v.trim();
    match v.find('(') {
        None => Some((v, Vec::new())),
        Some(open) => {
            let inner = v[open + 1..].strip_suffix(')')?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(str::trim).collect()
            };
            Some((v[..open].trim(), args))
        }
    }
}

fn nums(args: &[&str], n: usize) -> Option<Vec<f64>> {
    if args.len() != n {
        return None;
    }
    args.iter().map(|a| parse_f64(a)).collect()
}

fn as_mode(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0 && v < 1e6).then_some(v as usize)
}

fn parse_f0(v: &str) -> std::result::Result<F0Spec, String> {
    let bad = || {
        format!(
            "expected uniform_maxwellian(nbar), modulated_maxwellian(nbar, eps, mode), \
             two_stream(nbar, v0, eps, mode) or vacuum, got `{v}`"
        )
    };
    let (name, args) = call(v).ok_or_else(bad)?;
    let spec = match name {
        "uniform_maxwellian" => {
            let a = nums(&args, 1).ok_or_else(bad)?;
            F0Spec::UniformMaxwellian { nbar: a[0] }
        }
        "modulated_maxwellian" => {
            let a = nums(&args, 3).ok_or_else(bad)?;
            F0Spec::ModulatedMaxwellian {
                nbar: a[0],
                eps: a[1],
                mode: as_mode(a[2]).ok_or_else(bad)?,
            }
        }
        "two_stream" => {
            let a = nums(&args, 4).ok_or_else(bad)?;
            F0Spec::TwoStream {
                nbar: a[0],
                v0: a[1],
                eps: a[2],
                mode: as_mode(a[3]).ok_or_else(bad)?,
            }
        }
        "vacuum" if args.is_empty() => F0Spec::Vacuum,
        _ => return Err(bad()),
    };
    match spec {
        F0Spec::UniformMaxwellian { nbar }
        | F0Spec::ModulatedMaxwellian { nbar, .. }
        | F0Spec::TwoStream { nbar, .. }
            if nbar <= 0.0 =>
        {
            Err("nbar must be positive".into())
        }
        _ => Ok(spec),
    }
}

fn parse_next(v: &str) -> std::result::Result<NextSpec, String> {
    let bad = || format!("expected uniform(nbar), cosine(nbar, eps, mode), match_f0 or zero, got `{v}`");
    let (name, args) = call(v).ok_or_else(bad)?;
    match name {
        "uniform" => {
            let a = nums(&args, 1).ok_or_else(bad)?;
            Ok(NextSpec::Uniform { nbar: a[0] })
        }
        "cosine" => {
            let a = nums(&args, 3).ok_or_else(bad)?;
            Ok(NextSpec::Cosine {
                nbar: a[0],
                eps: a[1],
                mode: as_mode(a[2]).ok_or_else(bad)?,
            })
        }
        "match_f0" if args.is_empty() => Ok(NextSpec::MatchF0),
        "zero" if args.is_empty() => Ok(NextSpec::Zero),
        _ => Err(bad()),
    }
}

fn parse_wave(v: &str) -> std::result::Result<WaveSpec, String> {
    let bad = || format!("expected `amplitude, mode`, got `{v}`");
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let a = nums(&parts, 2).ok_or_else(bad)?;
    Ok(WaveSpec {
        amplitude: a[0],
        mode: as_mode(a[1]).ok_or_else(bad)?,
    })
}

fn parse_sigma(v: &str) -> std::result::Result<SigmaSpec, String> {
    let v = v.trim();
    if v == "maxwellian" {
        return Ok(SigmaSpec::Maxwellian);
    }
    if let Some(q) = v.strip_prefix("power:") {
        let q = parse_f64(q).ok_or_else(|| format!("bad exponent `{q}`"))?;
        if q <= 1.0 {
            return Err(format!("power exponent must exceed 1, got {q}"));
        }
        return Ok(SigmaSpec::Power(q));
    }
    Err(format!("expected maxwellian or power:q, got `{v}`"))
}

fn parse_model(v: &str) -> std::result::Result<ModelVariant, String> {
    match v.trim() {
        "nr" => Ok(ModelVariant::Nr),
        "qr" => Ok(ModelVariant::Qr),
        "fr" => Err("FR evolution unsupported; see docs".into()),
        other => Err(format!("expected nr or qr, got `{other}`")),
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, body, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(err(line, key, "unknown key"));
        };
        if entries.insert(known, (line, value)).is_some() {
            return Err(err(line, key, "duplicate key"));
        }
    }
    if let Some(&(line, v)) = entries.get("model") {
        parse_model(v).map_err(|m| err(line, "model", m))?;
    }
    for key in KEYS {
        if key != "snapshot_stride" && !entries.contains_key(key) {
            return Err(err(0, key, "missing mandatory key"));
        }
    }
    let get = |key: &str| entries[key];
    let float = |key: &str| -> Result<(usize, f64)> {
        let (line, v) = get(key);
        parse_f64(v)
            .map(|x| (line, x))
            .ok_or_else(|| err(line, key, format!("expected a number, got `{v}`")))
    };
    let count = |key: &str| -> Result<(usize, usize)> {
        let (line, v) = get(key);
        v.parse::<usize>()
            .map(|x| (line, x))
            .map_err(|_| err(line, key, format!("expected a nonnegative integer, got `{v}`")))
    };
    fn with<V>(entries: &BTreeMap<&str, (usize, &str)>, key: &str, r: std::result::Result<V, String>) -> Result<V> {
        r.map_err(|m| err(entries[key].0, key, m))
    }

    let model = with(&entries, "model", parse_model(get("model").1))?;
    let (line_np, np) = count("np")?;
    if np % 2 == 0 {
        return Err(err(line_np, "np", "np must be odd"));
    }
    let (line_l, length) = float("L")?;
    let (line_p, p_max) = float("p_max")?;
    let (line_nx, nx) = count("nx")?;
    if let Err(e) = PhaseGrid::new(length, nx, p_max, np) {
        let (line, key) = match &e {
            Error::InvalidGrid(m) if m.contains("nx") => (line_nx, "nx"),
            Error::InvalidGrid(m) if m.contains("np") => (line_np, "np"),
            Error::InvalidGrid(m) if m.contains("p_max") => (line_p, "p_max"),
            _ => (line_l, "L"),
        };
        return Err(err(line, key, e.to_string()));
    }
    let (line_nt, nt_per_window) = count("nt_per_window")?;
    if nt_per_window == 0 {
        return Err(err(line_nt, "nt_per_window", "must be at least 1"));
    }
    let (line_w, window_length) = float("window_length")?;
    if window_length <= 0.0 {
        return Err(err(line_w, "window_length", "must be positive"));
    }
    let (line_t, t_end) = float("t_end")?;
    let k = (t_end / window_length).round();
    if t_end <= 0.0 || (t_end - k * window_length).abs() > 1e-9 * t_end {
        return Err(err(line_t, "t_end", "must be a positive integer multiple of window_length"));
    }
    let (line_tol, tol_fp) = float("tol_fp")?;
    if tol_fp <= 0.0 {
        return Err(err(line_tol, "tol_fp", "tolerances must be positive"));
    }
    let (line_it, max_iters) = count("max_iters")?;
    if max_iters == 0 {
        return Err(err(line_it, "max_iters", "must be at least 1"));
    }
    let f0 = with(&entries, "f0", parse_f0(get("f0").1))?;
    let n_ext = with(&entries, "n_ext", parse_next(get("n_ext").1))?;
    let a0 = with(&entries, "A0", parse_wave(get("A0").1))?;
    let adot0 = with(&entries, "Adot0", parse_wave(get("Adot0").1))?;
    let sigma = with(&entries, "sigma", parse_sigma(get("sigma").1))?;
    let (_, dir) = get("output_dir");
    let snapshot_stride = if entries.contains_key("snapshot_stride") {
        let (line, s) = count("snapshot_stride")?;
        if s == 0 {
            return Err(err(line, "snapshot_stride", "must be at least 1"));
        }
        s
    } else {
        DEFAULT_SNAPSHOT_STRIDE
    };
    Ok(RunConfig {
        model,
        length,
        p_max,
        nx,
        np,
        nt_per_window,
        window_length,
        t_end,
        tol_fp,
        max_iters,
        f0,
        n_ext,
        a0,
        adot0,
        sigma,
        output_dir: PathBuf::from(dir),
        snapshot_stride,
    })
}

impl RunConfig {
    pub fn grid(&self) -> PhaseGrid<f64> {
        PhaseGrid::new(self.length, self.nx, self.p_max, self.np).expect("validated when parsed")
    }

    pub fn dt(&self) -> f64 {
        self.window_length / self.nt_per_window as f64
    }

    /// Canonical text form: every key in fixed order, numbers in shortest
    /// round-trip notation.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let f0 = match self.f0 {
            F0Spec::UniformMaxwellian { nbar } => format!("uniform_maxwellian({nbar})"),
            F0Spec::ModulatedMaxwellian { nbar, eps, mode } => {
                format!("modulated_maxwellian({nbar}, {eps}, {mode})")
            }
            F0Spec::TwoStream { nbar, v0, eps, mode } => format!("two_stream({nbar}, {v0}, {eps}, {mode})"),
            F0Spec::Vacuum => "vacuum".into(),
        };
        let n_ext = match self.n_ext {
            NextSpec::Uniform { nbar } => format!("uniform({nbar})"),
            NextSpec::Cosine { nbar, eps, mode } => format!("cosine({nbar}, {eps}, {mode})"),
            NextSpec::MatchF0 => "match_f0".into(),
            NextSpec::Zero => "zero".into(),
        };
        let sigma = match self.sigma {
            SigmaSpec::Maxwellian => "maxwellian".to_string(),
            SigmaSpec::Power(q) => format!("power:{q}"),
        };
        let lines: [(&str, String); 17] = [
            ("model", self.model.to_string()),
            ("L", self.length.to_string()),
            ("p_max", self.p_max.to_string()),
            ("nx", self.nx.to_string()),
            ("np", self.np.to_string()),
            ("nt_per_window", self.nt_per_window.to_string()),
            ("window_length", self.window_length.to_string()),
            ("t_end", self.t_end.to_string()),
            ("tol_fp", self.tol_fp.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("f0", f0),
            ("n_ext", n_ext),
            ("A0", format!("{}, {}", self.a0.amplitude, self.a0.mode)),
            ("Adot0", format!("{}, {}", self.adot0.amplitude, self.adot0.mode)),
            ("sigma", sigma),
            ("output_dir", self.output_dir.display().to_string()),
            ("snapshot_stride", self.snapshot_stride.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}
