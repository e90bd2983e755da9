use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{split_masks, GraphDataset, SplitFractions};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::tensor::Tensor;

/// Stochastic block model with Gaussian class-mean features.
///
/// `p_in > p_out` gives homophilic graphs, `p_in < p_out` heterophilic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub num_features: usize,
    pub signal: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.block_sizes.is_empty() || self.block_sizes.iter().sum::<usize>() == 0 {
            return bad("total node count is zero".into());
        }
        if self.block_sizes.contains(&0) {
            return bad(format!(
                "block sizes must be positive: {:?}",
                self.block_sizes
            ));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if !(self.signal.is_finite() && self.signal >= 0.0) {
            return bad(format!("signal strength {} must be >= 0", self.signal));
        }
        if self.num_features == 0 {
            return bad("feature dimension must be positive".into());
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }
}

impl fmt::Display for SbmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        write!(
            f,
            "blocks={};p_in={};p_out={};features={};signal={};seed={}",
            blocks.join(","),
            self.p_in,
            self.p_out,
            self.num_features,
            self.signal,
            self.seed
        )
    }
}

impl FromStr for SbmSpec {
    type Err = Error;

    /// Parses `blocks=50,50;p_in=0.1;p_out=0.01;features=16;signal=1;seed=7`.
    /// `features`, `signal` and `seed` are optional (16, 1, 0).
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SbmSpec {
            block_sizes: Vec::new(),
            p_in: f64::NAN,
            p_out: f64::NAN,
            num_features: 16,
            signal: 1.0,
            seed: 0,
        };
        let bad = |what: &str| Error::InvalidSpec(format!("cannot parse {what} in {s:?}"));
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad(part))?;
            let value = value.trim();
            match key.trim() {
                "blocks" => {
                    spec.block_sizes = value
                        .split(',')
                        .map(|b| b.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("blocks"))?
                }
                "p_in" => spec.p_in = value.parse().map_err(|_| bad("p_in"))?,
                "p_out" => spec.p_out = value.parse().map_err(|_| bad("p_out"))?,
                "features" => spec.num_features = value.parse().map_err(|_| bad("features"))?,
                "signal" => spec.signal = value.parse().map_err(|_| bad("signal"))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
                other => return Err(Error::InvalidSpec(format!("unknown SBM key {other:?}"))),
            }
        }
        if spec.p_in.is_nan() || spec.p_out.is_nan() {
            return Err(Error::InvalidSpec("p_in and p_out are required".into()));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Samples a graph from the block model.
///
/// Labels are block indices. Each class gets a mean vector with standard normal
/// entries; a node's features are `signal * mean + N(0, I)`. Masks use the
/// default 60/20/20 stratified split.
pub fn generate_sbm(spec: &SbmSpec) -> Result<GraphDataset> {
    spec.validate()?;
    let n = spec.num_nodes();
    let labels: Vec<usize> = spec
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();

    let mut rng = rng_for(spec.seed, &[stream::SBM_EDGES]);
    let mut adj = Tensor::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            // gen_bool panics outside [0, 1]; the spec was validated above.
            if rng.gen_bool(p) {
                adj.set(i, j, 1.0);
                adj.set(j, i, 1.0);
            }
        }
    }

    let mut rng = rng_for(spec.seed, &[stream::SBM_FEATURES]);
    let f = spec.num_features;
    let classes = spec.block_sizes.len();
    let means: Vec<f64> = (0..classes * f)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut features = Tensor::zeros(n, f);
    for (i, &c) in labels.iter().enumerate() {
        for (k, x) in features.row_slice_mut(i).iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *x = spec.signal * means[c * f + k] + noise;
        }
    }

    let masks = split_masks(&labels, SplitFractions::default(), spec.seed)?;
    GraphDataset::new("sbm", adj, features, labels, classes, masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(blocks: &[usize], p_in: f64, p_out: f64, seed: u64) -> SbmSpec {
        SbmSpec {
            block_sizes: blocks.to_vec(),
            p_in,
            p_out,
            num_features: 4,
            signal: 1.0,
            seed,
        }
    }

    #[test]
    fn two_cliques() {
        let g = generate_sbm(&spec(&[2, 2], 1.0, 0.0, 0)).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (2, 3)]);
        assert_eq!(g.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn no_edges() {
        let g = generate_sbm(&spec(&[5, 5], 0.0, 0.0, 3)).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn edge_count_within_three_sigma() {
        // 3 * C(50, 2) = 3675 intra pairs, 3 * 50 * 50 = 7500 inter pairs.
        let mean = 3675.0 * 0.1 + 7500.0 * 0.01;
        let var = 3675.0 * 0.1 * 0.9 + 7500.0 * 0.01 * 0.99;
        let g = generate_sbm(&spec(&[50, 50, 50], 0.1, 0.01, 7)).unwrap();
        let e = g.num_edges() as f64;
        assert!((e - mean).abs() <= 3.0 * f64::sqrt(var), "{e} vs {mean}");
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec(&[10, 12], 0.3, 0.05, 42);
        assert_eq!(generate_sbm(&s).unwrap(), generate_sbm(&s).unwrap());
        let mut other = s.clone();
        other.seed = 43;
        assert_ne!(generate_sbm(&s).unwrap(), generate_sbm(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            generate_sbm(&spec(&[], 0.1, 0.1, 0)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            generate_sbm(&spec(&[0], 0.1, 0.1, 0)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            generate_sbm(&spec(&[3], 1.5, 0.1, 0)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn parse_round_trip() {
        let s: SbmSpec = "blocks=100,100,100;p_in=0.1;p_out=0.01;features=8;signal=0.5;seed=7"
            .parse()
            .unwrap();
        assert_eq!(s.block_sizes, vec![100, 100, 100]);
        assert_eq!(s.to_string().parse::<SbmSpec>().unwrap(), s);
        assert!("blocks=3;p_in=0.1".parse::<SbmSpec>().is_err());
        assert!("blocks=3;p_in=0.1;p_out=0.2;colour=red"
            .parse::<SbmSpec>()
            .is_err());
    }
}
