//! Text form of a protocol: `key = value` lines for a `[flow]` block.

use super::{AmplitudeSchedule, FlowKind, Normalization, PhaseSchedule, StreamMode, VelocityProtocol};
use crate::{Error, Result};

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn floats(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{key}: cannot parse {t:?} as a number")))
        })
        .collect()
}

fn float(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::config(format!("{key}: cannot parse {s:?} as a number")))
}

impl VelocityProtocol {
    /// Key/value pairs that reproduce this protocol exactly through
    /// [`VelocityProtocol::from_entries`].
    pub fn to_entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![("kind".into(), self.kind_name().into())];
        match &self.kind {
            FlowKind::AlternatingSine { switching_period, phases } => {
                out.push(("switching_period".into(), switching_period.to_string()));
                match phases {
                    PhaseSchedule::Seeded { seed } => out.push(("seed".into(), seed.to_string())),
                    PhaseSchedule::Fixed { phases } => {
                        let list: Vec<String> =
                            phases.iter().map(|[a, b]| format!("{a}:{b}")).collect();
                        out.push(("phases".into(), list.join(",")));
                    }
                }
            }
            FlowKind::CustomStreamfunction { modes } => {
                let list: Vec<String> = modes
                    .iter()
                    .map(|m| format!("{}:{}:{}:{}", m.kx, m.ky, m.amplitude, m.phase))
                    .collect();
                out.push(("modes".into(), list.join(",")));
            }
            FlowKind::SteadyShear | FlowKind::Cellular => {}
        }
        match &self.schedule {
            AmplitudeSchedule::Constant { amplitude } => {
                out.push(("schedule".into(), "constant".into()));
                out.push(("amplitude".into(), amplitude.to_string()));
            }
            AmplitudeSchedule::Piecewise { breaks, amplitudes } => {
                out.push(("schedule".into(), "piecewise".into()));
                out.push(("breaks".into(), join(breaks)));
                out.push(("amplitudes".into(), join(amplitudes)));
            }
            AmplitudeSchedule::PowerLaw { amplitude, decay } => {
                out.push(("schedule".into(), "power-law".into()));
                out.push(("amplitude".into(), amplitude.to_string()));
                out.push(("decay".into(), decay.to_string()));
            }
        }
        if let Some(n) = self.normalization {
            out.push(("normalization".into(), join(&[n.p, n.s, n.horizon, n.factor])));
        }
        out
    }

    pub fn config_block(&self) -> String {
        let mut s = String::from("[flow]\n");
        for (k, v) in self.to_entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Builds a protocol from `key = value` pairs. Errors name the offending
    /// key; unknown keys are rejected.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut kind = None;
        let mut period = None;
        let mut seed = None;
        let mut phases = None;
        let mut modes = None;
        let mut schedule = "constant".to_string();
        let mut amplitude = None;
        let mut decay = None;
        let mut breaks = None;
        let mut amplitudes = None;
        let mut normalization = None;
        for (key, value) in entries {
            let value = value.trim();
            match key {
                "kind" => kind = Some(value.to_string()),
                "switching_period" => period = Some(float(key, value)?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|_| {
                        Error::config(format!("seed: cannot parse {value:?} as an unsigned integer"))
                    })?)
                }
                "phases" => {
                    let mut list = Vec::new();
                    for item in value.split(',') {
                        let parts: Vec<&str> = item.split(':').collect();
                        if parts.len() != 2 {
                            return Err(Error::config(format!("phases: expected phi:psi, got {item:?}")));
                        }
                        list.push([float(key, parts[0])?, float(key, parts[1])?]);
                    }
                    phases = Some(list);
                }
                "modes" => {
                    let mut list = Vec::new();
                    for item in value.split(',') {
                        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
                        if parts.len() != 4 {
                            return Err(Error::config(format!(
                                "modes: expected kx:ky:amplitude:phase, got {item:?}"
                            )));
                        }
                        let int = |s: &str| {
                            s.parse::<i32>()
                                .map_err(|_| Error::config(format!("modes: bad wavenumber {s:?}")))
                        };
                        list.push(StreamMode {
                            kx: int(parts[0])?,
                            ky: int(parts[1])?,
                            amplitude: float(key, parts[2])?,
                            phase: float(key, parts[3])?,
                        });
                    }
                    modes = Some(list);
                }
                "schedule" => schedule = value.to_string(),
                "amplitude" => amplitude = Some(float(key, value)?),
                "decay" => decay = Some(float(key, value)?),
                "breaks" => breaks = Some(floats(key, value)?),
                "amplitudes" => amplitudes = Some(floats(key, value)?),
                "normalization" => {
                    let v = floats(key, value)?;
                    if v.len() != 4 {
                        return Err(Error::config("normalization: expected p,s,horizon,factor"));
                    }
                    normalization = Some(Normalization { p: v[0], s: v[1], horizon: v[2], factor: v[3] });
                }
                other => return Err(Error::config(format!("{other}: unknown flow key"))),
            }
        }
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::config(format!("{key}: missing")));
        let kind = match kind.as_deref() {
            Some("steady-shear") => FlowKind::SteadyShear,
            Some("cellular") => FlowKind::Cellular,
            Some("alternating-sine") => {
                let phases = match (seed, phases) {
                    (Some(seed), None) => PhaseSchedule::Seeded { seed },
                    (None, Some(phases)) => PhaseSchedule::Fixed { phases },
                    (None, None) => PhaseSchedule::Seeded { seed: 0 },
                    (Some(_), Some(_)) => {
                        return Err(Error::config("phases: give either seed or phases, not both"))
                    }
                };
                FlowKind::AlternatingSine { switching_period: need(period, "switching_period")?, phases }
            }
            Some("custom-streamfunction") => FlowKind::CustomStreamfunction {
                modes: modes.ok_or_else(|| Error::config("modes: missing"))?,
            },
            Some(other) => return Err(Error::config(format!("kind: unknown flow kind {other:?}"))),
            None => return Err(Error::config("kind: missing")),
        };
        let schedule = match schedule.as_str() {
            "constant" => AmplitudeSchedule::Constant { amplitude: need(amplitude, "amplitude")? },
            "power-law" => AmplitudeSchedule::PowerLaw {
                amplitude: need(amplitude, "amplitude")?,
                decay: need(decay, "decay")?,
            },
            "piecewise" => AmplitudeSchedule::Piecewise {
                breaks: breaks.ok_or_else(|| Error::config("breaks: missing"))?,
                amplitudes: amplitudes.ok_or_else(|| Error::config("amplitudes: missing"))?,
            },
            other => return Err(Error::config(format!("schedule: unknown schedule {other:?}"))),
        };
        let mut protocol = VelocityProtocol::new(kind, schedule)?;
        protocol.normalization = normalization;
        Ok(protocol)
    }
}
