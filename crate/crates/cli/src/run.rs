//! Wiring a config into a chain and driving it.

use revevo::limits::PriorScaling;
use revevo::{effective_alpha, scaled_weights, stream_rng, wrap_with_luck, Chain, Kernel, Population, ProductBreeding};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// Everything a chain at one population size is built from.
#[derive(Debug, Clone)]
pub struct ChainSetup {
    pub n: usize,
    /// urn pseudo-counts actually handed to the breeding process
    pub urn_alpha: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kernel: Kernel,
}

pub fn chain_setup(cfg: &ExperimentConfig, n: usize) -> CliResult<ChainSetup> {
    let space = cfg.space()?;
    let urn_alpha = match cfg.prior_scaling {
        PriorScaling::Scaled => cfg
            .alphas()
            .iter()
            .map(|a| effective_alpha(a, n, cfg.lambda))
            .collect::<revevo::Result<Vec<_>>>()?,
        PriorScaling::Fixed => cfg.alphas(),
    };
    let weights = scaled_weights(&cfg.phi, n, cfg.lambda)?;
    let breeding = ProductBreeding::from_alphas(space, &urn_alpha)?;
    let mut kernel = Kernel::new(breeding, weights.clone(), cfg.kernel_config()?)?;
    if let Some(luck) = cfg.luck()? {
        kernel = wrap_with_luck(kernel, luck)?;
    }
    Ok(ChainSetup { n, urn_alpha, weights, kernel })
}

/// RNG stream of replicate `r` at population size `n`; independent of how
/// chains are scheduled.
pub fn chain_stream(n: usize, replicate: usize) -> u64 {
    ((n as u64) << 24) | replicate as u64
}

/// Starts from the breeding prior, runs `steps` generations and calls
/// `observe(step, population)` after burn-in at the thinning stride.
pub fn run_chain<F>(cfg: &ExperimentConfig, n: usize, replicate: usize, mut observe: F) -> CliResult<()>
where
    F: FnMut(u64, &Population),
{
    let setup = chain_setup(cfg, n)?;
    let mut rng = stream_rng(cfg.seed, chain_stream(n, replicate));
    let mut chain = Chain::from_prior(setup.kernel, n, &mut rng)?;
    for step in 1..=cfg.steps {
        chain.step(&mut rng);
        if step > cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0 {
            observe(step, chain.population());
        }
    }
    Ok(())
}

/// Frequency of `allele` at `locus`.
pub fn frequency(pop: &Population, locus: usize, allele: usize) -> f64 {
    pop.locus_counts(locus)[allele] as f64 / pop.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lambda: f64) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!(
            "alleles = 2\nbase_alpha = [0.3, 0.7]\nphi = [0.0, 1.791759469228055]\nlambda = {lambda:?}\nn = [50]\nsteps = 2000\nburn_in = 1000\nthinning = 10"
        ))
        .unwrap()
    }

    #[test]
    fn urn_alpha_follows_the_scaling() {
        assert_eq!(chain_setup(&cfg(0.0), 1000).unwrap().urn_alpha, vec![vec![300.0, 700.0]]);
        assert_eq!(chain_setup(&cfg(1.0), 1000).unwrap().urn_alpha, vec![vec![0.3, 0.7]]);
        let mut c = cfg(0.5);
        c.prior_scaling = PriorScaling::Fixed;
        assert_eq!(chain_setup(&c, 1000).unwrap().urn_alpha, vec![vec![0.3, 0.7]]);
        let w = chain_setup(&cfg(0.5), 100).unwrap().weights;
        assert!((w[1] - (-(6f64.ln()) / 10.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn records_at_the_stride() {
        let mut steps = Vec::new();
        run_chain(&cfg(0.0), 50, 0, |s, p| {
            assert_eq!(p.len(), 50);
            steps.push(s)
        })
        .unwrap();
        assert_eq!(steps.len(), 100);
        assert_eq!((steps[0], *steps.last().unwrap()), (1010, 2000));
    }
}
