use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticError {
    #[error("no chains supplied")]
    NoChains,
    #[error("chain {chain} has {len} draws, at least 4 are needed")]
    TooShort { chain: usize, len: usize },
}

/// Guard on the within-chain variance so constant chains do not divide by
/// zero.
const W_EPSILON: f64 = 1e-12;

fn split(chains: &[&[f64]]) -> Result<Vec<Vec<f64>>, DiagnosticError> {
    if chains.is_empty() {
        return Err(DiagnosticError::NoChains);
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if let Some((chain, c)) = chains.iter().enumerate().find(|(_, c)| c.len() < 4) {
        return Err(DiagnosticError::TooShort {
            chain,
            len: c.len(),
        });
    }
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c[..n];
        out.push(c[..half].to_vec());
        out.push(c[n - half..].to_vec());
    }
    Ok(out)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

struct Moments {
    means: Vec<f64>,
    within: f64,
    var_plus: f64,
    n: usize,
}

fn moments(parts: &[Vec<f64>]) -> Moments {
    let n = parts[0].len();
    let m = parts.len();
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let within = parts
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_variance(c, mu))
        .sum::<f64>()
        / m as f64;
    let grand = mean(&means);
    let between_over_n = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let var_plus = (n - 1) as f64 / n as f64 * within + between_over_n;
    Moments {
        means,
        within,
        var_plus,
        n,
    }
}

/// Classic split-chain potential scale reduction factor. Every chain is cut
/// into halves (trailing draws of longer chains are ignored), so a single
/// chain is allowed. Returns 1.0 when all draws are identical.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64, DiagnosticError> {
    let parts = split(chains)?;
    let mo = moments(&parts);
    if mo.var_plus == 0.0 {
        return Ok(1.0);
    }
    Ok((mo.var_plus / mo.within.max(W_EPSILON)).sqrt())
}

fn autocovariance(x: &[f64], mu: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - mu) * (b - mu))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size on split chains, truncating the summed
/// autocorrelations with Geyer's initial positive (monotone) sequence.
/// Degenerate input with no variance reports 0.
pub fn split_ess(chains: &[&[f64]]) -> Result<f64, DiagnosticError> {
    let parts = split(chains)?;
    let mo = moments(&parts);
    let m = parts.len();
    let n = mo.n;
    let total = (m * n) as f64;
    if mo.var_plus == 0.0 || mo.within == 0.0 {
        return Ok(0.0);
    }
    let rho = |lag: usize| {
        let mean_acov = parts
            .iter()
            .zip(&mo.means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (mo.within - mean_acov) / mo.var_plus
    };

    let mut tau = -1.0;
    let mut previous = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(previous);
        tau += 2.0 * pair;
        previous = pair;
        lag += 2;
    }
    // Antithetic chains can push tau below 1; cap as Stan does.
    let tau = tau.max(1.0 / total.log10());
    Ok(total / tau)
}

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman–Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
