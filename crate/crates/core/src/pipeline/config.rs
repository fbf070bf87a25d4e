//! Pipeline configuration: `key = value` lines under `[section]` headers.
//!
//! Sections are `pipeline`, `synthgen`, `ingest`, `encounter`, `autoencoder`, `clustering`,
//! `evaluation` and `plot`. Every key has a default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::autoencoder::{validate_dims, Activation, TrainConfig, DEFAULT_LAYER_DIMS};
use crate::category::Category;
use crate::clustering::KMeansConfig;
use crate::encounter::{DetectParams, FeatureConfig};
use crate::error::{Error, Result};
use crate::ingest::{GeoBBox, DEFAULT_RATE_HZ};
use crate::plot::PlotStyle;
use crate::synthgen::DatasetOptions;

/// Which representation `cluster` runs k-means on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterSpace {
    Latent,
    Raw,
}

impl FromStr for ClusterSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "latent" => Ok(ClusterSpace::Latent),
            "raw" => Ok(ClusterSpace::Raw),
            other => Err(Error::validation("clustering.space", format!("expected latent or raw, got {other:?}"))),
        }
    }
}

impl ClusterSpace {
    pub fn name(self) -> &'static str {
        match self {
            ClusterSpace::Latent => "latent",
            ClusterSpace::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub bbox: GeoBBox,
    pub rate_hz: f64,
    /// Longer gaps between samples split a trajectory.
    pub max_gap_s: f64,
    pub strict: bool,
    /// Trip log read by `extract`; empty means `<out_dir>/trips.csv`.
    pub trip_log: String,
    /// Ground-truth labels; empty means `<out_dir>/labels.csv` when it exists.
    pub labels: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub counts: BTreeMap<Category, usize>,
    pub dataset: DatasetOptions,
    pub ingest: IngestConfig,
    pub detect: DetectParams,
    pub features: FeatureConfig,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    /// Activation of the reconstruction layer; `None` reuses `activation`.
    pub output_activation: Option<Activation>,
    pub train: TrainConfig,
    pub kmeans: KMeansConfig,
    pub restarts: usize,
    pub space: ClusterSpace,
    pub sample_size: usize,
    pub plot: PlotStyle,
    /// Number of single-encounter figures written by `plot`.
    pub plot_encounters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let counts = Category::ALL
            .iter()
            .map(|&c| (c, if c == Category::Merge { 0 } else { 200 }))
            .collect();
        Self {
            seed: 1,
            out_dir: PathBuf::from("out"),
            counts,
            dataset: DatasetOptions::default(),
            ingest: IngestConfig {
                bbox: GeoBBox::STUDY_AREA,
                rate_hz: DEFAULT_RATE_HZ,
                max_gap_s: 1.0,
                strict: false,
                trip_log: String::new(),
                labels: String::new(),
            },
            detect: DetectParams::default(),
            features: FeatureConfig::default(),
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            activation: Activation::Tanh,
            output_activation: None,
            train: TrainConfig::default(),
            kmeans: KMeansConfig::default(),
            restarts: 10,
            space: ClusterSpace::Latent,
            sample_size: 100,
            plot: PlotStyle::default(),
            plot_encounters: 6,
        }
    }
}

fn key_name(section: &str, key: &str) -> String {
    format!("{section}.{key}")
}

fn as_f64(name: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::validation(name, format!("expected a number, got {s:?}"))),
        other => Err(Error::validation(name, format!("expected a number, got {other}"))),
    }
}

fn as_u64(name: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::validation(name, format!("expected a non-negative integer, got {s:?}"))),
        other => Err(Error::validation(name, format!("expected a non-negative integer, got {other}"))),
    }
}

fn as_usize(name: &str, v: &Value) -> Result<usize> {
    as_u64(name, v).map(|n| n as usize)
}

fn as_bool(name: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) if s == "true" => Ok(true),
        Value::String(s) if s == "false" => Ok(false),
        other => Err(Error::validation(name, format!("expected true or false, got {other}"))),
    }
}

fn as_str(name: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        other => Err(Error::validation(name, format!("expected a string, got {other}"))),
    }
}

fn as_dims(name: &str, v: &Value) -> Result<Vec<usize>> {
    match v {
        Value::Array(items) => items.iter().map(|x| as_usize(name, x)).collect(),
        Value::String(s) => s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::validation(name, format!("expected a list of widths, got {s:?}")))
            })
            .collect(),
        other => Err(Error::validation(name, format!("expected a list of widths, got {other}"))),
    }
}

/// Parses the right-hand side of `--set section.key=value`. Bare words are taken as strings.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()))
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Defaults overridden by every `[section]` key in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let mut cfg = Self::default();
        for (section, body) in &table {
            let Value::Table(body) = body else {
                return Err(Error::Config(format!("top-level key {section:?} must sit inside a [section]")));
            };
            for (key, value) in body {
                cfg.set(section, key, value)?;
            }
        }
        Ok(cfg)
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key {path:?} lacks a section")))?;
        self.set(section, key, &parse_value(raw))
    }

    pub fn set(&mut self, section: &str, key: &str, v: &Value) -> Result<()> {
        let name = key_name(section, key);
        let n = name.as_str();
        match (section, key) {
            ("pipeline", "seed") => self.seed = as_u64(n, v)?,
            ("pipeline", "out_dir") => self.out_dir = PathBuf::from(as_str(n, v)?),

            ("synthgen", "duration_s") => self.dataset.duration_s = as_f64(n, v)?,
            ("synthgen", "gps_noise_m") => self.dataset.gps_noise_m = as_f64(n, v)?,
            ("synthgen", "spacing_s") => self.dataset.spacing_s = as_f64(n, v)?,
            ("synthgen", "anchor_margin_deg") => self.dataset.anchor_margin_deg = as_f64(n, v)?,
            ("synthgen", cat) if cat.parse::<Category>().is_ok() => {
                self.counts.insert(cat.parse().unwrap(), as_usize(n, v)?);
            }

            ("ingest", "lon_min") => self.ingest.bbox.lon_min = as_f64(n, v)?,
            ("ingest", "lon_max") => self.ingest.bbox.lon_max = as_f64(n, v)?,
            ("ingest", "lat_min") => self.ingest.bbox.lat_min = as_f64(n, v)?,
            ("ingest", "lat_max") => self.ingest.bbox.lat_max = as_f64(n, v)?,
            ("ingest", "rate_hz") => self.ingest.rate_hz = as_f64(n, v)?,
            ("ingest", "max_gap_s") => self.ingest.max_gap_s = as_f64(n, v)?,
            ("ingest", "strict") => self.ingest.strict = as_bool(n, v)?,
            ("ingest", "trip_log") => self.ingest.trip_log = as_str(n, v)?,
            ("ingest", "labels") => self.ingest.labels = as_str(n, v)?,

            ("encounter", "threshold_m") => self.detect.threshold_m = as_f64(n, v)?,
            ("encounter", "min_duration_s") => self.detect.min_duration_s = as_f64(n, v)?,
            ("encounter", "gap_tolerance_s") => self.detect.gap_tolerance_s = as_f64(n, v)?,
            ("encounter", "window") | ("encounter", "T") => self.features.window = as_usize(n, v)?,
            ("encounter", "reference_lat") => self.features.reference_lat = as_f64(n, v)?,

            ("autoencoder", "layer_dims") => self.layer_dims = as_dims(n, v)?,
            ("autoencoder", "activation") => self.activation = as_str(n, v)?.parse()?,
            ("autoencoder", "output_activation") => {
                self.output_activation = match as_str(n, v)?.as_str() {
                    "same" | "" => None,
                    other => Some(other.parse()?),
                }
            }
            ("autoencoder", "learning_rate") => self.train.learning_rate = as_f64(n, v)?,
            ("autoencoder", "epochs") => self.train.epochs = as_usize(n, v)?,
            ("autoencoder", "shuffle") => self.train.shuffle = as_bool(n, v)?,
            ("autoencoder", "stop_tolerance") => self.train.stop_tolerance = as_f64(n, v)?,

            ("clustering", "k") => self.kmeans.k = as_usize(n, v)?,
            ("clustering", "max_iter") => self.kmeans.max_iter = as_usize(n, v)?,
            ("clustering", "tol") => self.kmeans.tol = as_f64(n, v)?,
            ("clustering", "restarts") => self.restarts = as_usize(n, v)?,
            ("clustering", "space") => self.space = as_str(n, v)?.parse()?,

            ("evaluation", "sample_size") => self.sample_size = as_usize(n, v)?,

            ("plot", "encounters") => self.plot_encounters = as_usize(n, v)?,
            ("plot", "max_panels") => self.plot.max_panels = as_usize(n, v)?,
            ("plot", "columns") => self.plot.columns = as_usize(n, v)?,
            ("plot", "panel_width") => self.plot.panel_width = as_f64(n, v)?,
            ("plot", "panel_height") => self.plot.panel_height = as_f64(n, v)?,
            ("plot", "stroke_a") => self.plot.stroke_a = as_str(n, v)?,
            ("plot", "stroke_b") => self.plot.stroke_b = as_str(n, v)?,

            _ => return Err(Error::Config(format!("unknown configuration key {name:?}"))),
        }
        Ok(())
    }

    /// Checks every setting against the invariants of the module that consumes it.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if !(d.duration_s >= crate::synthgen::MIN_DURATION_S) {
            return Err(Error::validation(
                "synthgen.duration_s",
                format!("must be at least {} s", crate::synthgen::MIN_DURATION_S),
            ));
        }
        if !(d.gps_noise_m >= 0.0) {
            return Err(Error::validation("synthgen.gps_noise_m", "must be non-negative"));
        }
        if !(d.spacing_s >= 0.0) {
            return Err(Error::validation("synthgen.spacing_s", "must be non-negative"));
        }
        if !(d.anchor_margin_deg >= 0.0) {
            return Err(Error::validation("synthgen.anchor_margin_deg", "must be non-negative"));
        }
        self.ingest.bbox.validate()?;
        if !(self.ingest.rate_hz > 0.0) || !self.ingest.rate_hz.is_finite() {
            return Err(Error::validation("ingest.rate_hz", "must be positive"));
        }
        if !(self.ingest.max_gap_s > 0.0) {
            return Err(Error::validation("ingest.max_gap_s", "must be positive"));
        }
        self.detect_params().validate()?;
        if self.features.window < 2 {
            return Err(Error::validation("encounter.window", "must be at least 2"));
        }
        if !(self.features.reference_lat.abs() < 90.0) {
            return Err(Error::validation("encounter.reference_lat", "must lie strictly within (-90, 90)"));
        }
        validate_dims(&self.layer_dims)?;
        if self.layer_dims[0] != self.features.dimension() {
            return Err(Error::validation(
                "autoencoder.layer_dims",
                format!(
                    "input width {} does not match the feature dimension {}",
                    self.layer_dims[0],
                    self.features.dimension()
                ),
            ));
        }
        self.train.validate()?;
        if self.kmeans.k == 0 {
            return Err(Error::validation("clustering.k", "must be at least 1"));
        }
        if self.kmeans.max_iter == 0 {
            return Err(Error::validation("clustering.max_iter", "must be at least 1"));
        }
        if !(self.kmeans.tol >= 0.0) {
            return Err(Error::validation("clustering.tol", "must be non-negative"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("clustering.restarts", "must be at least 1"));
        }
        if self.sample_size == 0 {
            return Err(Error::validation("evaluation.sample_size", "must be at least 1"));
        }
        if self.plot.columns == 0 || self.plot.max_panels == 0 {
            return Err(Error::validation("plot.columns", "columns and max_panels must be at least 1"));
        }
        if !(self.plot.panel_width > 100.0 && self.plot.panel_height > 100.0) {
            return Err(Error::validation("plot.panel_width", "panels must be larger than 100 px"));
        }
        Ok(())
    }

    pub fn detect_params(&self) -> DetectParams {
        DetectParams {
            rate_hz: self.ingest.rate_hz,
            ..self.detect
        }
    }

    pub fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            bbox: self.ingest.bbox,
            ..self.dataset.clone()
        }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn trip_log_path(&self) -> PathBuf {
        if self.ingest.trip_log.is_empty() {
            self.path("trips.csv")
        } else {
            PathBuf::from(&self.ingest.trip_log)
        }
    }

    pub fn labels_path(&self) -> PathBuf {
        if self.ingest.labels.is_empty() {
            self.path("labels.csv")
        } else {
            PathBuf::from(&self.ingest.labels)
        }
    }

    /// Renders the effective configuration in the file format.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let b = &self.ingest.bbox;
        let _ = writeln!(s, "[pipeline]\nseed = {}\nout_dir = {:?}\n", self.seed, self.out_dir.display().to_string());
        let _ = writeln!(s, "[synthgen]");
        for (c, n) in &self.counts {
            let _ = writeln!(s, "{} = {n}", c.name());
        }
        let d = &self.dataset;
        let _ = writeln!(
            s,
            "duration_s = {:?}\ngps_noise_m = {:?}\nspacing_s = {:?}\nanchor_margin_deg = {:?}\n",
            d.duration_s, d.gps_noise_m, d.spacing_s, d.anchor_margin_deg
        );
        let _ = writeln!(
            s,
            "[ingest]\nlon_min = {:?}\nlon_max = {:?}\nlat_min = {:?}\nlat_max = {:?}\nrate_hz = {:?}\nmax_gap_s = {:?}\nstrict = {}\ntrip_log = {:?}\nlabels = {:?}\n",
            b.lon_min, b.lon_max, b.lat_min, b.lat_max, self.ingest.rate_hz, self.ingest.max_gap_s, self.ingest.strict,
            self.ingest.trip_log, self.ingest.labels
        );
        let _ = writeln!(
            s,
            "[encounter]\nthreshold_m = {:?}\nmin_duration_s = {:?}\ngap_tolerance_s = {:?}\nwindow = {}\nreference_lat = {:?}\n",
            self.detect.threshold_m, self.detect.min_duration_s, self.detect.gap_tolerance_s, self.features.window,
            self.features.reference_lat
        );
        let t = &self.train;
        let _ = writeln!(
            s,
            "[autoencoder]\nlayer_dims = {:?}\nactivation = {:?}\noutput_activation = {:?}\nlearning_rate = {:?}\nepochs = {}\nshuffle = {}\nstop_tolerance = {:?}\n",
            self.layer_dims,
            self.activation.name(),
            self.output_activation.map_or("same", |a| a.name()),
            t.learning_rate,
            t.epochs,
            t.shuffle,
            t.stop_tolerance
        );
        let _ = writeln!(
            s,
            "[clustering]\nk = {}\nrestarts = {}\nmax_iter = {}\ntol = {:?}\nspace = {:?}\n",
            self.kmeans.k, self.restarts, self.kmeans.max_iter, self.kmeans.tol, self.space.name()
        );
        let _ = writeln!(s, "[evaluation]\nsample_size = {}\n", self.sample_size);
        let p = &self.plot;
        let _ = writeln!(
            s,
            "[plot]\nencounters = {}\nmax_panels = {}\ncolumns = {}\npanel_width = {:?}\npanel_height = {:?}\nstroke_a = {:?}\nstroke_b = {:?}",
            self.plot_encounters, p.max_panels, p.columns, p.panel_width, p.panel_height, p.stroke_a, p.stroke_b
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.counts.values().sum::<usize>(), 800);
        assert_eq!(cfg.layer_dims, vec![200, 100, 50, 25, 50, 100, 200]);
        assert_eq!(cfg.activation, Activation::Tanh);
    }

    #[test]
    fn file_and_overrides() {
        let mut cfg = PipelineConfig::from_toml_str(
            "[pipeline]\nseed = 7\n[clustering]\nk = 8\nspace = \"raw\"\n[synthgen]\nmerge = 5\n",
        )
        .unwrap();
        assert_eq!((cfg.seed, cfg.kmeans.k, cfg.space), (7, 8, ClusterSpace::Raw));
        assert_eq!(cfg.counts[&Category::Merge], 5);
        cfg.apply_override("autoencoder.activation=relu").unwrap();
        cfg.apply_override("autoencoder.layer_dims=[4, 2, 4]").unwrap();
        cfg.apply_override("pipeline.out_dir=/tmp/x").unwrap();
        cfg.apply_override("autoencoder.learning_rate=0.5").unwrap();
        assert_eq!(cfg.activation, Activation::Relu);
        assert_eq!(cfg.layer_dims, vec![4, 2, 4]);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.train.learning_rate, 0.5);
    }

    #[test]
    fn rejects_unknown_or_malformed() {
        assert!(matches!(PipelineConfig::from_toml_str("[clustering]\nkk = 1\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml_str("seed = 1\n"), Err(Error::Config(_))));
        let mut cfg = PipelineConfig::default();
        assert!(cfg.apply_override("noequals").is_err());
        assert!(cfg.apply_override("clustering.k=-3").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("clustering.k=0").unwrap();
        match cfg.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "clustering.k"),
            other => panic!("{other:?}"),
        }
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("autoencoder.layer_dims=[100, 50, 100]").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rendered_config_reads_back() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("clustering.k=4").unwrap();
        cfg.apply_override("plot.stroke_a=\"#000\"").unwrap();
        cfg.apply_override("autoencoder.output_activation=affine").unwrap();
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
