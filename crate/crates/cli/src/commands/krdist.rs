use std::path::{Path, PathBuf};

use smix_core::kr::{
    coarse_grain, coarsening_error, discretize, kr_distance_entropic, kr_distance_exact, DiscreteMeasurePair,
    EntropicOptions, KrMethod, KrResult, DEFAULT_MASS_FLOOR,
};
use smix_core::spectral::snapshot::load_snapshot;
use smix_core::spectral::ScalarField;

use super::{create_dir, read_file, write_file};
use crate::error::{CliError, CliResult};

pub const RESULT_FILE: &str = "kr.json";

/// What a KR computation runs on.
#[derive(Clone, Debug)]
pub enum KrInput {
    Field(ScalarField),
    /// Signed point masses; positive masses form `θ⁺`, negative ones `θ⁻`.
    Points(DiscreteMeasurePair),
}

impl KrInput {
    /// Reads a binary snapshot, a run directory (its final snapshot), a
    /// field CSV `x,y,value` or a point CSV `x,y,mass`.
    pub fn load(path: &Path) -> CliResult<Self> {
        if path.is_dir() {
            let final_snap = path.join("snapshots").join("final.bin");
            if !final_snap.exists() {
                return Err(CliError::Usage(format!(
                    "{} holds no snapshots/final.bin; rerun with `formats = csv,snapshots`",
                    path.display()
                )));
            }
            return Ok(KrInput::Field(load_snapshot(final_snap)?));
        }
        if path.extension().is_some_and(|e| e == "csv") {
            return parse_csv(&read_file(path)?, &path.display().to_string());
        }
        Ok(KrInput::Field(load_snapshot(path)?))
    }
}

fn parse_csv(text: &str, name: &str) -> CliResult<KrInput> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.replace(' ', "")).unwrap_or_default();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let vals: Option<Vec<f64>> = line.split(',').map(|t| t.trim().parse().ok()).collect();
        match vals {
            Some(v) if v.len() == 3 => rows.push([v[0], v[1], v[2]]),
            _ => {
                return Err(CliError::ConfigAt {
                    path: name.into(),
                    line: idx + 1,
                    message: format!("expected three numbers, got {line:?}"),
                })
            }
        }
    }
    match header.as_str() {
        "x,y,mass" => {
            let (mut plus, mut minus) = (Vec::new(), Vec::new());
            for [x, y, m] in rows {
                if m > 0.0 {
                    plus.push(([x.rem_euclid(1.0), y.rem_euclid(1.0)], m));
                } else if m < 0.0 {
                    minus.push(([x.rem_euclid(1.0), y.rem_euclid(1.0)], -m));
                }
            }
            Ok(KrInput::Points(DiscreteMeasurePair::new(plus, minus)?))
        }
        "x,y,value" => {
            let n = (rows.len() as f64).sqrt().round() as usize;
            if n * n != rows.len() || n == 0 {
                return Err(CliError::Config(format!("{name}: {} rows do not form a square grid", rows.len())));
            }
            let mut values = vec![f64::NAN; n * n];
            for [x, y, v] in rows {
                let i = (x * n as f64).round() as usize % n;
                let j = (y * n as f64).round() as usize % n;
                values[j * n + i] = v;
            }
            if values.iter().any(|v| v.is_nan()) {
                return Err(CliError::Config(format!("{name}: grid points are missing or repeated")));
            }
            Ok(KrInput::Field(ScalarField::from_values(n, values)?))
        }
        other => Err(CliError::Config(format!("{name}: unknown CSV header {other:?} (x,y,mass or x,y,value)"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrRequest {
    pub deltas: Vec<f64>,
    pub method: KrMethod,
    /// Block-average a field input to `m × m` cells first.
    pub coarse: Option<usize>,
    pub entropic: EntropicOptions,
    /// Directory receiving one plan CSV per δ.
    pub plan_dir: Option<PathBuf>,
}

impl Default for KrRequest {
    fn default() -> Self {
        KrRequest {
            deltas: vec![0.1],
            method: KrMethod::ExactFlow,
            coarse: None,
            entropic: EntropicOptions::default(),
            plan_dir: None,
        }
    }
}

pub fn plan_file_name(delta: f64) -> String {
    format!("plan_delta_{delta:e}.csv")
}

/// `D_δ` for every requested δ; with `out` the results are also written to
/// `kr.json` there.
pub fn cmd_krdist(input: &KrInput, request: &KrRequest, out: Option<&Path>) -> CliResult<Vec<KrResult>> {
    if request.deltas.is_empty() {
        return Err(CliError::Usage("give at least one delta".into()));
    }
    if request.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(CliError::Config("delta values must be positive".into()));
    }
    let (pair, fine) = match input {
        KrInput::Points(pair) => {
            if request.coarse.is_some() {
                return Err(CliError::Usage("coarse-graining needs a field input, not point masses".into()));
            }
            (pair.clone(), None)
        }
        KrInput::Field(field) => match request.coarse.filter(|&m| m < field.n()) {
            Some(m) => (discretize(&coarse_grain(field, m)?, DEFAULT_MASS_FLOOR)?, Some((field, m))),
            None => (discretize(field, DEFAULT_MASS_FLOOR)?, None),
        },
    };
    let mut results = Vec::with_capacity(request.deltas.len());
    for &delta in &request.deltas {
        let mut r = match request.method {
            KrMethod::ExactFlow => kr_distance_exact(&pair, delta)?,
            KrMethod::Entropic => kr_distance_entropic(&pair, delta, request.entropic)?,
        };
        if let Some((field, m)) = fine {
            r.coarsening_error = Some(coarsening_error(field, m, delta)?);
        }
        if let Some(dir) = &request.plan_dir {
            create_dir(dir)?;
            let path = dir.join(plan_file_name(delta));
            let mut buf = Vec::new();
            r.write_plan_csv(&mut buf)?;
            write_file(&path, buf)?;
        }
        results.push(r);
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join(RESULT_FILE), results_json(&results))?;
    }
    Ok(results)
}

/// One result per line inside a JSON array.
pub fn results_json(results: &[KrResult]) -> String {
    let body: Vec<String> = results.iter().map(|r| format!("  {}", r.to_json())).collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}
