//! Log-domain Sinkhorn with ε-scaling. The returned value is the cost of the
//! rounded (exactly feasible) plan; the gap is measured against the dual
//! objective of the c-transformed potentials, so `value − gap ≤ D_δ ≤ value`.

use super::{check_delta, DiscreteMeasurePair, KrMethod, KrResult, PlanEntry};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropicOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop when the relative `L¹` marginal violation falls below this.
    pub marginal_tol: f64,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        EntropicOptions { epsilon: 1e-3, max_iterations: 100_000, marginal_tol: 1e-9 }
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn kr_distance_entropic(pair: &DiscreteMeasurePair, delta: f64, options: EntropicOptions) -> Result<KrResult> {
    check_delta(delta)?;
    if !(options.epsilon > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let (np, nm) = (pair.plus.len(), pair.minus.len());
    if np == 0 || nm == 0 || pair.total_mass == 0.0 {
        return Ok(KrResult {
            value: 0.0,
            delta,
            method: KrMethod::Entropic,
            gap: 0.0,
            iterations: Some(0),
            coarsening_error: None,
            converged: true,
            plan: Some(Vec::new()),
        });
    }
    let cost = pair.cost_matrix(delta);
    let a: Vec<f64> = pair.plus.iter().map(|p| p.1).collect();
    let b: Vec<f64> = pair.minus.iter().map(|p| p.1).collect();
    let la: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mass = pair.total_mass;

    // plan π_ij = exp((f_i + g_j − C_ij)/ε)
    let mut f = vec![0.0; np];
    let mut g = vec![0.0; nm];
    let cmax = cost.iter().cloned().fold(0.0, f64::max);
    let mut eps = cmax.max(options.epsilon);
    let mut iterations = 0;
    let mut converged = false;
    let mut col = vec![0.0; np];
    loop {
        let last = eps <= options.epsilon;
        let tol = if last { options.marginal_tol } else { options.marginal_tol.max(1e-4) };
        let mut level_converged = false;
        while iterations < options.max_iterations {
            iterations += 1;
            for i in 0..np {
                let row = &cost[i * nm..(i + 1) * nm];
                let lse = log_sum_exp((0..nm).map(|j| (g[j] - row[j]) / eps));
                f[i] = eps * (la[i] - lse);
            }
            let mut err = 0.0;
            for j in 0..nm {
                for i in 0..np {
                    col[i] = (f[i] - cost[i * nm + j]) / eps;
                }
                let lse = log_sum_exp(col.iter().copied());
                let gj = eps * (lb[j] - lse);
                // column marginal before the update measures the violation
                err += (b[j] * ((g[j] - gj) / eps).exp() - b[j]).abs();
                g[j] = gj;
            }
            if err <= tol * mass {
                level_converged = true;
                break;
            }
        }
        if last {
            converged = level_converged;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        eps = (eps * 0.5).max(options.epsilon);
    }

    let mut plan = vec![0.0; np * nm];
    for i in 0..np {
        for j in 0..nm {
            plan[i * nm + j] = ((f[i] + g[j] - cost[i * nm + j]) / eps).exp();
        }
    }
    round_to_polytope(&mut plan, &a, &b);
    let value: f64 = plan.iter().zip(&cost).map(|(p, c)| p * c).sum();

    // feasible dual pair through c-transforms
    let mut psi = vec![f64::INFINITY; nm];
    for i in 0..np {
        for j in 0..nm {
            psi[j] = psi[j].min(cost[i * nm + j] - f[i]);
        }
    }
    let mut phi = vec![f64::INFINITY; np];
    for i in 0..np {
        for j in 0..nm {
            phi[i] = phi[i].min(cost[i * nm + j] - psi[j]);
        }
    }
    let dual: f64 = a.iter().zip(&phi).map(|(x, y)| x * y).sum::<f64>()
        + b.iter().zip(&psi).map(|(x, y)| x * y).sum::<f64>();
    let gap = (value - dual).max(0.0);

    let entries = plan
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(k, &m)| PlanEntry { src: pair.plus[k / nm].0, dst: pair.minus[k % nm].0, mass: m })
        .collect();
    Ok(KrResult {
        value,
        delta,
        method: KrMethod::Entropic,
        gap,
        iterations: Some(iterations),
        coarsening_error: None,
        converged,
        plan: Some(entries),
    })
}

/// Rounding onto `Π(a, b)`: scale rows and columns down to the marginals, then
/// spread the deficits with a rank-one correction.
fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (np, nm) = (a.len(), b.len());
    for i in 0..np {
        let row = &mut plan[i * nm..(i + 1) * nm];
        let r: f64 = row.iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            row.iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..nm {
        let c: f64 = (0..np).map(|i| plan[i * nm + j]).sum();
        if c > b[j] {
            let s = b[j] / c;
            (0..np).for_each(|i| plan[i * nm + j] *= s);
        }
    }
    let ea: Vec<f64> = (0..np).map(|i| (a[i] - plan[i * nm..(i + 1) * nm].iter().sum::<f64>()).max(0.0)).collect();
    let eb: Vec<f64> = (0..nm).map(|j| (b[j] - (0..np).map(|i| plan[i * nm + j]).sum::<f64>()).max(0.0)).collect();
    let total: f64 = ea.iter().sum();
    if total > 0.0 {
        for i in 0..np {
            for j in 0..nm {
                plan[i * nm + j] += ea[i] * eb[j] / total;
            }
        }
    }
}
