//! Measurement files, fit results and plot output.
//!
//! Measurement files are CSV with optional metadata lines before the header:
//!
//! ```text
//! # d0 = 10
//! # c = 140
//! # frequency_hz = 5.6e9
//! distance_m,pathloss_db,censored
//! 10,67.2,0
//! 25.5,140,1
//! ```
//!
//! Metadata lines start with `#` and hold `key = value`. Other `#` lines are
//! comments. The `censored` column is optional. Without it, rows at or above
//! `c` are censored on ingest. `c` may be `inf`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::avar::StandardErrors;
use crate::error::{Error, Result};
use crate::model::{
    check_sample, regressor, spaced_distances, CensoredSample, Dataset, PathlossParams, Spacing,
};
use crate::montecarlo::ExperimentSpec;
use crate::ols::{CensoredHandling, OlsFit};
use crate::tobit::{FitWarning, TobitFit};

/// Points per fitted curve in plot output.
pub const CURVE_POINTS: usize = 200;

/// Parses a decimal number, accepting `inf`, `+inf` and `-inf`. NaN is rejected.
pub fn parse_float(text: &str) -> Option<f64> {
    let v: f64 = text.trim().parse().ok()?;
    (!v.is_nan()).then_some(v)
}

/// Shortest text that parses back to the same double; infinities as `inf`.
pub fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FloatRepr {
    Num(f64),
    Text(String),
}

impl FloatRepr {
    fn value<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            FloatRepr::Num(v) => Ok(v),
            FloatRepr::Text(s) => {
                parse_float(&s).ok_or_else(|| E::custom(format!("not a number: {s:?}")))
            }
        }
    }
}

/// Serde adapter writing infinities as the strings `"inf"` / `"-inf"`.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(&super::format_float(*v))
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::FloatRepr::deserialize(d)?.value()
    }
}

/// [`float_or_inf`] for optional values.
pub mod opt_float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::float_or_inf::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<super::FloatRepr>::deserialize(d)?
            .map(|r| r.value())
            .transpose()
    }
}

/// Values that take precedence over the file's metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub d0: Option<f64>,
    pub c: Option<f64>,
    pub frequency_hz: Option<f64>,
}

#[derive(Default)]
struct Metadata {
    d0: Option<f64>,
    c: Option<f64>,
    frequency_hz: Option<f64>,
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_metadata(text: &str, path: &Path) -> Result<Metadata> {
    let mut meta = Metadata::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i as u64 + 1;
        let Some(body) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = body.split_once('=') else {
            continue;
        };
        let slot = match key.trim() {
            "d0" => &mut meta.d0,
            "c" => &mut meta.c,
            "frequency_hz" => &mut meta.frequency_hz,
            _ => continue,
        };
        if slot.is_some() {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate metadata key `{}`", key.trim()),
            ));
        }
        let v = parse_float(value).ok_or_else(|| {
            parse_error(
                path,
                lineno,
                format!("bad value {:?} for `{}`", value.trim(), key.trim()),
            )
        })?;
        *slot = Some(v);
    }
    Ok(meta)
}

/// Parses measurement-file text. `path` is used only in error messages.
pub fn parse_dataset(text: &str, path: &Path, overrides: &Overrides) -> Result<Dataset> {
    let meta = read_metadata(text, path)?;
    let d0 = overrides.d0.or(meta.d0).ok_or(Error::MissingKey("d0"))?;
    let c = overrides.c.or(meta.c).ok_or(Error::MissingCensorLevel)?;
    let frequency_hz = overrides.frequency_hz.or(meta.frequency_hz);

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_line = text
        .lines()
        .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map_or(1, |i| i as u64 + 1);
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, header_line, e.to_string()))?
        .clone();
    let has_flag = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["distance_m", "pathloss_db"] => false,
        ["distance_m", "pathloss_db", "censored"] => true,
        other => {
            return Err(parse_error(
                path,
                header_line,
                format!(
                    "expected header `distance_m,pathloss_db[,censored]`, got `{}`",
                    other.join(",")
                ),
            ))
        }
    };

    // The csv reader's own line counter skips blank lines; byte offsets are exact.
    let line_at = |byte: u64| {
        let bytes = text.as_bytes();
        let mut at = byte as usize;
        while at < bytes.len() && matches!(bytes[at], b'\n' | b'\r') {
            at += 1;
        }
        bytes[..at].iter().filter(|&&b| b == b'\n').count() as u64 + 1
    };
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| line_at(p.byte()));
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| line_at(p.byte()));
        let number = |k: usize, name: &str| {
            let field = &record[k];
            parse_float(field)
                .ok_or_else(|| parse_error(path, line, format!("{name}: not a number: {field:?}")))
        };
        let distance = number(0, "distance_m")?;
        let value = number(1, "pathloss_db")?;
        let sample = if has_flag {
            let censored = match &record[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_error(
                        path,
                        line,
                        format!("censored: expected 0 or 1, got {other:?}"),
                    ))
                }
            };
            CensoredSample {
                distance,
                value,
                censored,
            }
        } else if value >= c {
            CensoredSample {
                distance,
                value: c,
                censored: true,
            }
        } else {
            CensoredSample {
                distance,
                value,
                censored: false,
            }
        };
        check_sample(&sample, d0, c).map_err(|message| Error::Invariant {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(parse_error(path, header_line, "no data rows"));
    }
    Dataset::new(samples, d0, c)?.with_frequency(frequency_hz)
}

pub fn read_dataset(path: &Path, overrides: &Overrides) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_dataset(&text, path, overrides)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes via a temporary file in the target directory, so a failure never
/// leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let wrap = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents).map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn format_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "# d0 = {}", format_float(dataset.d0())).unwrap();
    writeln!(out, "# c = {}", format_float(dataset.c())).unwrap();
    if let Some(f) = dataset.frequency_hz() {
        writeln!(out, "# frequency_hz = {}", format_float(f)).unwrap();
    }
    out.push_str("distance_m,pathloss_db,censored\n");
    for s in dataset.samples() {
        writeln!(
            out,
            "{},{},{}",
            format_float(s.distance),
            format_float(s.value),
            u8::from(s.censored)
        )
        .unwrap();
    }
    out
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_atomic(path, format_dataset(dataset).as_bytes())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub n_censored: usize,
    pub censored_fraction: f64,
    pub d0: f64,
    #[serde(with = "float_or_inf")]
    pub c: f64,
    pub frequency_hz: Option<f64>,
}

impl DatasetSummary {
    pub fn of(dataset: &Dataset) -> Self {
        Self {
            samples: dataset.len(),
            n_censored: dataset.n_censored(),
            censored_fraction: dataset.censored_fraction(),
            d0: dataset.d0(),
            c: dataset.c(),
            frequency_hz: dataset.frequency_hz(),
        }
    }
}

/// OLS has no standard error for σ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSection {
    pub mode: CensoredHandling,
    pub pl_d0: f64,
    pub n: f64,
    pub sigma: f64,
    pub sigma_sq: f64,
    pub se_pl_d0: f64,
    pub se_n: f64,
    pub count: usize,
    pub residuals: Vec<f64>,
}

impl From<&OlsFit> for OlsSection {
    fn from(fit: &OlsFit) -> Self {
        Self {
            mode: fit.mode,
            pl_d0: fit.params.pl_d0,
            n: fit.params.n,
            sigma: fit.params.sigma,
            sigma_sq: fit.sigma_sq_hat,
            se_pl_d0: fit.se_pl_d0,
            se_n: fit.se_n,
            count: fit.count,
            residuals: fit.residuals.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitSection {
    pub pl_d0: f64,
    pub n: f64,
    pub sigma: f64,
    pub sigma_sq: f64,
    /// Null when PL(d0) was fixed or the information matrix was singular.
    pub se_pl_d0: Option<f64>,
    pub se_n: Option<f64>,
    pub se_sigma_sq: Option<f64>,
    pub se_error: Option<String>,
    pub nll: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_censored: usize,
    pub n_uncensored: usize,
    pub fixed_pl_d0: Option<f64>,
    pub warnings: Vec<FitWarning>,
}

impl TobitSection {
    pub fn new(fit: &TobitFit, se: &Result<StandardErrors>) -> Self {
        let (se_pl_d0, se_n, se_sigma_sq, se_error) = match se {
            Ok(se) => (se.se_pl_d0, Some(se.se_n), Some(se.se_sigma_sq), None),
            Err(e) => (None, None, None, Some(e.to_string())),
        };
        Self {
            pl_d0: fit.params.pl_d0,
            n: fit.params.n,
            sigma: fit.params.sigma,
            sigma_sq: fit.params.sigma * fit.params.sigma,
            se_pl_d0,
            se_n,
            se_sigma_sq,
            se_error,
            nll: fit.nll,
            converged: fit.converged,
            iterations: fit.iterations,
            n_censored: fit.n_censored,
            n_uncensored: fit.n_uncensored,
            fixed_pl_d0: fit.fixed_pl_d0,
            warnings: fit.warnings.clone(),
        }
    }
}

/// Everything `pathloss fit` writes. Keys appear in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub version: String,
    pub input: InputInfo,
    pub dataset: DatasetSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ols: Option<OlsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tobit: Option<TobitSection>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_result(path: &Path, report: &FitReport) -> Result<()> {
    if report.ols.is_none() && report.tobit.is_none() {
        return Err(Error::Domain("result has no fits".into()));
    }
    write_json(path, report)
}

pub fn read_result(path: &Path) -> Result<FitReport> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Loads a TOML experiment spec and validates it.
pub fn read_experiment_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = read_text(path)?;
    let spec: ExperimentSpec =
        toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

/// A fitted mean line to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve<'a> {
    pub label: &'a str,
    pub params: PathlossParams,
}

/// Mean pathloss at [`CURVE_POINTS`] log-spaced distances from d0 to `d_max`.
pub fn curve_points(params: &PathlossParams, d0: f64, d_max: f64) -> Result<Vec<(f64, f64)>> {
    let d = spaced_distances(Spacing::Log, d0, d_max.max(d0), CURVE_POINTS)?;
    Ok(d.into_iter()
        .map(|d| (d, params.mean_at(regressor(d, d0))))
        .collect())
}

/// Long-format CSV with columns `series,distance_m,pathloss_db,censored`.
///
/// Series `sample` holds the data, one series per curve holds its mean line,
/// and `censor_level` holds the level at both ends of the range when finite.
pub fn format_plot_data(dataset: &Dataset, curves: &[Curve]) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Domain("plot data needs at least one fit".into()));
    }
    let mut out = String::from("series,distance_m,pathloss_db,censored\n");
    for s in dataset.samples() {
        writeln!(
            out,
            "sample,{},{},{}",
            format_float(s.distance),
            format_float(s.value),
            u8::from(s.censored)
        )
        .unwrap();
    }
    let d_max = dataset.max_distance();
    for curve in curves {
        for (d, v) in curve_points(&curve.params, dataset.d0(), d_max)? {
            writeln!(
                out,
                "{},{},{},",
                curve.label,
                format_float(d),
                format_float(v)
            )
            .unwrap();
        }
    }
    if dataset.c().is_finite() {
        for d in [dataset.d0(), d_max] {
            writeln!(
                out,
                "censor_level,{},{},",
                format_float(d),
                format_float(dataset.c())
            )
            .unwrap();
        }
    }
    Ok(out)
}

pub fn emit_plot_data(path: &Path, dataset: &Dataset, curves: &[Curve]) -> Result<()> {
    write_atomic(path, format_plot_data(dataset, curves)?.as_bytes())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// Static SVG scatter of the samples with fitted lines on a log-distance axis.
pub fn render_svg(dataset: &Dataset, curves: &[Curve]) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Domain("plot needs at least one fit".into()));
    }
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 60.0);
    let d0 = dataset.d0();
    let d_max = dataset.max_distance();
    let lx0 = d0.log10();
    let lx1 = if d_max > d0 { d_max.log10() } else { lx0 + 1.0 };

    let lines = curves
        .iter()
        .map(|c| curve_points(&c.params, d0, d_max))
        .collect::<Result<Vec<_>>>()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let values = dataset
        .samples()
        .iter()
        .map(|s| s.value)
        .chain(lines.iter().flatten().map(|p| p.1));
    for v in values.chain(dataset.c().is_finite().then_some(dataset.c())) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = ((hi - lo) * 0.05).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |d: f64| left + (d.log10() - lx0) / (lx1 - lx0) * (w - left - right);
    let sy = |v: f64| top + (hi - v) / (hi - lo) * (h - top - bottom);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    )
    .unwrap();
    let mut decade = lx0.floor() as i32;
    while f64::from(decade) <= lx1 {
        let d = 10f64.powi(decade);
        if d >= d0 * (1.0 - 1e-12) {
            let x = sx(d);
            writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
                h - bottom,
                h - bottom + 5.0
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{x:.2}" y="{}" text-anchor="middle">{d}</text>"#,
                h - bottom + 20.0
            )
            .unwrap();
        }
        decade += 1;
    }
    let step = 10f64.powf(((hi - lo) / 6.0).log10().floor());
    let step = if (hi - lo) / step > 12.0 {
        step * 5.0
    } else if (hi - lo) / step > 6.0 {
        step * 2.0
    } else {
        step
    };
    let mut tick = (lo / step).ceil() * step;
    while tick <= hi {
        let y = sy(tick);
        writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#,
            left - 5.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + 4.0,
            format_float(tick)
        )
        .unwrap();
        tick += step;
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">distance (m)</text>"#,
        (left + w - right) / 2.0,
        h - 15.0
    )
    .unwrap();
    writeln!(out, r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">pathloss (dB)</text>"#, (top + h - bottom) / 2.0).unwrap();

    if dataset.c().is_finite() {
        let y = sy(dataset.c());
        writeln!(
            out,
            r#"<line class="censor-level" x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            w - right
        )
        .unwrap();
    }
    for s in dataset.samples() {
        let (x, y) = (sx(s.distance), sy(s.value));
        if s.censored {
            writeln!(out, r#"<circle class="sample censored" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="none" stroke="gray"/>"#).unwrap();
        } else {
            writeln!(out, r#"<circle class="sample" cx="{x:.2}" cy="{y:.2}" r="2" fill="black" fill-opacity="0.6"/>"#).unwrap();
        }
    }
    for (k, (curve, pts)) in curves.iter().zip(&lines).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(d, v)| format!("{:.2},{:.2}", sx(d), sy(v)))
            .collect();
        writeln!(
            out,
            r#"<polyline class="fit" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = top + 18.0 + 16.0 * k as f64;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{} n={:.3} σ={:.3} dB</text>"#,
            left + 10.0,
            xml_escape(curve.label),
            curve.params.n,
            curve.params.sigma
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(path: &Path, dataset: &Dataset, curves: &[Curve]) -> Result<()> {
    write_atomic(path, render_svg(dataset, curves)?.as_bytes())
}
