//! Path CSVs, flat config files, run manifests and experiment artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{GridSpec, HermiteSpec, SamplePath, SimOptions};
use crate::mc::{DriverKind, EstimateRecord, Experiment, GtRecord, MCConfig, MCResult, RawTable};
use crate::vasicek::VasicekParams;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HVASICEK_OUT_DIR";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn format_err(row: usize, message: impl Into<String>) -> Error {
    Error::Format { row, message: message.into() }
}

/// Writes `t,value` rows. Row numbers in read errors count the header as row 1.
pub fn write_path_csv<W: Write>(path: &SamplePath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "value"])?;
    for (t, v) in path.grid().times().zip(path.values()) {
        w.write_record([fmt_f64(t), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,value` CSV on a uniform grid starting at 0.
pub fn read_path_csv<R: Read>(input: R) -> Result<SamplePath> {
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.len() != 2 || &header[0] != "t" || &header[1] != "value" {
        return Err(format_err(1, format!("expected header `t,value`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != 2 {
            return Err(format_err(row, format!("expected 2 columns, found {}", rec.len())));
        }
        let parse = |s: &str, what: &str| {
            s.trim().parse::<f64>().map_err(|_| format_err(row, format!("cannot parse {what} `{s}`")))
        };
        ts.push(parse(&rec[0], "time")?);
        vs.push(parse(&rec[1], "value")?);
    }
    if ts.is_empty() {
        return Err(format_err(2, "no data rows"));
    }
    if ts.len() < 2 {
        return Err(format_err(3, "a path needs at least two points"));
    }
    let n = ts.len() - 1;
    let horizon = ts[n];
    let grid = GridSpec::new(horizon, n).map_err(|e| format_err(ts.len() + 1, e.to_string()))?;
    let slack = 1e-9 * grid.dt();
    for (k, t) in ts.iter().enumerate() {
        if (t - grid.time(k)).abs() > slack {
            return Err(format_err(
                k + 2,
                format!("time grid is not uniform from 0: expected t = {}, found {t}", grid.time(k)),
            ));
        }
    }
    SamplePath::new(grid, vs)
}

pub fn write_path_file(path: &SamplePath, file: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_path_csv(path, &mut buf)?;
    write_atomic(file, &buf)
}

pub fn read_path_file(file: &Path) -> Result<SamplePath> {
    read_path_csv(fs::File::open(file)?)
}

/// Writes through a sibling temporary file and a rename, so readers never see a partial file.
pub fn write_atomic(file: &Path, bytes: &[u8]) -> Result<()> {
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = file.file_name().ok_or_else(|| Error::config(format!("not a file path: {}", file.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, file)?;
    Ok(())
}

/// Flat `key = value` settings; `#` starts a comment.
pub type Settings = BTreeMap<String, String>;

pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "q",
    "H",
    "a",
    "b",
    "horizons",
    "dt",
    "replications",
    "seed",
    "workers",
    "refinement",
    "max_step_variance_error",
    "driver",
    "require_ks",
    "gt_points_per_rate",
];

fn get<T: std::str::FromStr>(s: &Settings, key: &str) -> Result<Option<T>> {
    match s.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::config(format!("cannot parse `{key} = {v}`"))),
    }
}

/// Builds an experiment configuration; missing keys take the defaults of [`MCConfig::new`].
pub fn config_from_settings(s: &Settings, experiment: Option<Experiment>) -> Result<MCConfig> {
    if let Some(k) = s.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::config(format!("unknown setting `{k}`")));
    }
    let experiment = match (experiment, get::<String>(s, "experiment")?) {
        (Some(e), Some(text)) if text.parse::<Experiment>()? != e => {
            return Err(Error::config(format!("settings are for `{text}`, but `{e}` was requested")));
        }
        (Some(e), _) => e,
        (None, Some(text)) => text.parse()?,
        (None, None) => return Err(Error::config("no experiment given")),
    };
    let q: u32 = get(s, "q")?.unwrap_or(1);
    let h: f64 = get(s, "H")?.ok_or_else(|| Error::config("setting `H` is required"))?;
    let spec = HermiteSpec::new(q, h)?;
    let params = VasicekParams::new(get(s, "a")?.unwrap_or(1.0), get(s, "b")?.unwrap_or(0.0))?;
    let mut c = MCConfig::new(experiment, spec, params);
    if let Some(list) = s.get("horizons") {
        c.horizons = list
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::config(format!("bad horizon `{x}`"))))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = get(s, "dt")? {
        c.dt = v;
    }
    if let Some(v) = get(s, "replications")? {
        c.replications = v;
    }
    if let Some(v) = get(s, "seed")? {
        c.master_seed = v;
    }
    if let Some(v) = get(s, "workers")? {
        c.workers = v;
    }
    let mut sim = SimOptions::default();
    if let Some(v) = get(s, "refinement")? {
        sim.refinement = v;
    }
    if let Some(v) = get(s, "max_step_variance_error")? {
        sim.max_step_variance_error = v;
    }
    c.sim = sim;
    if let Some(v) = get::<String>(s, "driver")? {
        c.driver = match v.as_str() {
            "hermite" => DriverKind::Hermite,
            "zero" => DriverKind::Zero,
            _ => return Err(Error::config(format!("unknown driver `{v}`"))),
        };
    }
    if let Some(v) = get(s, "require_ks")? {
        c.require_ks = v;
    }
    if let Some(v) = get(s, "gt_points_per_rate")? {
        c.gt_points_per_rate = v;
    }
    c.validate()?;
    Ok(c)
}

/// Flat-file form of a configuration; parses back to an identical value.
pub fn settings_text(c: &MCConfig) -> String {
    let horizons: Vec<String> = c.horizons.iter().map(|h| fmt_f64(*h)).collect();
    let driver = match c.driver {
        DriverKind::Hermite => "hermite",
        DriverKind::Zero => "zero",
    };
    let mut s = String::new();
    let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    put("experiment", c.experiment.to_string());
    put("q", c.spec.q().to_string());
    put("H", fmt_f64(c.spec.h()));
    put("a", fmt_f64(c.params.a));
    put("b", fmt_f64(c.params.b));
    put("horizons", horizons.join(","));
    put("dt", fmt_f64(c.dt));
    put("replications", c.replications.to_string());
    put("seed", c.master_seed.to_string());
    put("workers", c.workers.to_string());
    put("refinement", c.sim.refinement.to_string());
    put("max_step_variance_error", fmt_f64(c.sim.max_step_variance_error));
    put("driver", driver.to_string());
    put("require_ks", c.require_ks.to_string());
    put("gt_points_per_rate", fmt_f64(c.gt_points_per_rate));
    s
}

/// Provenance record written next to every result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: MCConfig,
    pub master_seed: u64,
    pub started: String,
    pub finished: String,
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(result: &MCResult, started: chrono::DateTime<chrono::Utc>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: result.config.clone(),
            master_seed: result.config.master_seed,
            started: started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            wall_time_secs: result.wall_time_secs,
            warnings: result.summary.warnings.clone(),
        }
    }

    pub fn read(file: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(file)?)?)
    }

    pub fn write(&self, file: &Path) -> Result<()> {
        write_atomic(file, &serde_json::to_vec_pretty(self)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RAW_FILE: &str = "raw.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const RESULT_FILE: &str = "result.json";

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn raw_csv(raw: &RawTable) -> Result<Vec<u8>> {
    match raw {
        RawTable::Estimates(rows) => csv_bytes(
            &["horizon", "replication", "seed", "a_hat", "b_hat", "alpha_T", "excluded"],
            rows.iter().map(|r| {
                vec![
                    fmt_f64(r.horizon),
                    r.replication.to_string(),
                    r.seed.to_string(),
                    fmt_f64(r.a_hat),
                    fmt_f64(r.b_hat),
                    fmt_f64(r.alpha_t),
                    r.excluded.to_string(),
                ]
            }),
        ),
        RawTable::Gt(rows) => csv_bytes(
            &["horizon", "replication", "seed", "g_t"],
            rows.iter().map(|r| {
                vec![fmt_f64(r.horizon), r.replication.to_string(), r.seed.to_string(), fmt_f64(r.g_t)]
            }),
        ),
    }
}

/// Parses a raw table written by [`raw_csv`].
pub fn read_raw_csv<R: Read>(input: R) -> Result<RawTable> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let gt = header == ["horizon", "replication", "seed", "g_t"];
    let est = header == ["horizon", "replication", "seed", "a_hat", "b_hat", "alpha_T", "excluded"];
    if !gt && !est {
        return Err(format_err(1, format!("unrecognized raw header `{}`", header.join(","))));
    }
    let mut e_rows = Vec::new();
    let mut g_rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| format_err(row, format!("bad number `{}`", &rec[k])));
        let u = |k: usize| rec[k].parse::<u64>().map_err(|_| format_err(row, format!("bad integer `{}`", &rec[k])));
        if gt {
            g_rows.push(GtRecord { horizon: f(0)?, replication: u(1)? as usize, seed: u(2)?, g_t: f(3)? });
        } else {
            e_rows.push(EstimateRecord {
                horizon: f(0)?,
                replication: u(1)? as usize,
                seed: u(2)?,
                a_hat: f(3)?,
                b_hat: f(4)?,
                alpha_t: f(5)?,
                excluded: rec[6].parse().map_err(|_| format_err(row, "bad flag"))?,
            });
        }
    }
    Ok(if gt { RawTable::Gt(g_rows) } else { RawTable::Estimates(e_rows) })
}

pub fn summary_csv(result: &MCResult) -> Result<Vec<u8>> {
    let s = &result.summary;
    if !s.gt_rows.is_empty() {
        return csv_bytes(
            &["horizon", "n", "mean", "se_mean", "variance", "skewness", "variance_ratio", "variance_change"],
            s.gt_rows.iter().map(|r| {
                vec![
                    fmt_f64(r.horizon),
                    r.n.to_string(),
                    fmt_f64(r.mean),
                    fmt_f64(r.se_mean),
                    fmt_f64(r.variance),
                    fmt_f64(r.skewness),
                    fmt_f64(r.variance_ratio),
                    fmt_f64(r.variance_change),
                ]
            }),
        );
    }
    csv_bytes(
        &[
            "horizon",
            "used",
            "excluded",
            "mean_abs_err_a",
            "mean_abs_err_b",
            "mean_err_a",
            "mean_err_b",
            "sd_a",
            "sd_b",
            "skew_a",
            "skew_b",
            "kurt_a",
            "kurt_b",
            "corr_ab",
            "normalized_sd_a",
            "normalized_sd_b",
        ],
        s.rows.iter().map(|r| {
            let mut v = vec![fmt_f64(r.horizon), r.used.to_string(), r.excluded.to_string()];
            v.extend(
                [
                    r.mean_abs_err_a,
                    r.mean_abs_err_b,
                    r.mean_err_a,
                    r.mean_err_b,
                    r.sd_a,
                    r.sd_b,
                    r.skew_a,
                    r.skew_b,
                    r.kurt_a,
                    r.kurt_b,
                    r.corr_ab,
                    r.normalized_sd_a,
                    r.normalized_sd_b,
                ]
                .map(fmt_f64),
            );
            v
        }),
    )
}

pub fn plot_csv(result: &MCResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["logT", "log_sd_a", "log_sd_b"],
        result
            .summary
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.horizon.ln()), fmt_f64(r.sd_a.ln()), fmt_f64(r.sd_b.ln())]),
    )
}

/// Writes manifest, raw table, summary, plot data (rate and distribution runs) and the full result.
pub fn write_experiment(dir: &Path, result: &MCResult, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(RAW_FILE), &raw_csv(&result.raw)?)?;
    write_atomic(&dir.join(SUMMARY_FILE), &summary_csv(result)?)?;
    if matches!(result.config.experiment, Experiment::Rate | Experiment::Distribution) {
        write_atomic(&dir.join(PLOT_FILE), &plot_csv(result)?)?;
    }
    write_atomic(&dir.join(RESULT_FILE), &serde_json::to_vec_pretty(&result.summary)?)?;
    manifest.write(&dir.join(MANIFEST_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::simulate_fbm;

    #[test]
    fn path_round_trip() {
        let p = simulate_fbm(0.7, GridSpec::new(3.0, 50).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        assert_eq!(read_path_csv(&buf[..]).unwrap(), p);
    }

    #[test]
    fn empty_data_is_a_format_error() {
        assert!(matches!(read_path_csv("t,value\n".as_bytes()), Err(Error::Format { .. })));
    }

    #[test]
    fn column_mismatch_names_the_row() {
        let text = "t,value\n0,0\n0.5,1,7\n1,2\n";
        match read_path_csv(text.as_bytes()) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_uniform_grid_names_first_bad_row() {
        let text = "t,value\n0,0\n0.25,1\n0.6,2\n0.75,1\n1,0\n";
        match read_path_csv(text.as_bytes()) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn settings_round_trip() {
        let mut c = MCConfig::new(
            Experiment::Rate,
            HermiteSpec::new(2, 0.7).unwrap(),
            VasicekParams::new(1.5, -0.25).unwrap(),
        );
        c.dt = 0.1;
        c.master_seed = u64::MAX;
        let back = config_from_settings(&parse_settings(&settings_text(&c)).unwrap(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_setting_is_rejected() {
        let s = parse_settings("H = 0.6\nfoo = 1\n").unwrap();
        assert!(config_from_settings(&s, Some(Experiment::Rate)).is_err());
    }
}
