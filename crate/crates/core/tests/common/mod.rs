#![allow(dead_code)]

use entropy_gap::adapt::{Method, MethodConfig};
use entropy_gap::codec::{EncodeOptions, HyperpriorInput, Instance};
use entropy_gap::container::ScaleDescriptor;
use entropy_gap::entropy::{assign_scales, PmfTable, SymbolStream};
use entropy_gap::latent::{
    synthesize, synthesize_factorized, Distribution, LatentTensor, Shape, SideInfo, SynthSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub main: LatentTensor,
    pub side: Option<(LatentTensor, SideInfo)>,
    pub tables: Vec<PmfTable>,
    pub scales: ScaleDescriptor,
    pub options: EncodeOptions,
}

impl Case {
    pub fn instance(&self) -> Instance<'_> {
        Instance {
            main: &self.main,
            tables: &self.tables,
            hyperprior: self.side.as_ref().map(|(side, info)| HyperpriorInput {
                side,
                side_info: info,
                scales: self.scales,
            }),
        }
    }

    /// Symbol streams in container order: factorized, then hyperprior.
    pub fn streams(&self) -> Vec<SymbolStream> {
        match &self.side {
            None => vec![SymbolStream::new(self.main.symbols().to_vec(), self.main.channel_assignment()).unwrap()],
            Some((side, info)) => {
                let table = self.scales.table().unwrap();
                vec![
                    SymbolStream::new(side.symbols().to_vec(), side.channel_assignment()).unwrap(),
                    SymbolStream::new(self.main.symbols().to_vec(), assign_scales(info, &table)).unwrap(),
                ]
            }
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng) -> Distribution {
    match rng.random_range(0..3) {
        0 => Distribution::Gaussian {
            mean: rng.random_range(-0.5..0.5),
            sigma: rng.random_range(0.3..4.0),
        },
        1 => Distribution::Laplacian {
            mean: rng.random_range(-0.5..0.5),
            scale: rng.random_range(0.3..3.0),
        },
        _ => Distribution::Mixture {
            weight: rng.random_range(0.1..0.9),
            first: (rng.random_range(-4.0..0.0), rng.random_range(0.3..2.0)),
            second: (rng.random_range(0.0..4.0), rng.random_range(0.3..2.0)),
        },
    }
}

pub fn random_config(rng: &mut ChaCha8Rng, method: Method) -> MethodConfig {
    MethodConfig {
        method,
        components: rng.random_range(1..=3),
        targets: rng.random_range(0..=64),
        bits: [4, 6, 8, 8][rng.random_range(0..4)],
    }
}

pub fn random_method(rng: &mut ChaCha8Rng) -> Method {
    Method::ALL[rng.random_range(0..Method::ALL.len())]
}

/// A randomized instance: layout, shape, distributions, mismatch, method
/// settings and coder precision all drawn from `seed`.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = rng.random_bool(0.5);
    let max_side = if rng.random_bool(0.3) { 24 } else { 8 };
    let shape = Shape::new(
        rng.random_range(1..=max_side),
        rng.random_range(1..=max_side),
        rng.random_range(1..=4),
    );
    let channels = shape.channels as usize;
    let learned: Vec<Distribution> = (0..channels).map(|_| random_distribution(&mut rng)).collect();
    let mut spec = SynthSpec::new(rng.random(), shape, learned[0], learned[0]);
    spec.learned = learned.clone();
    spec.true_dist = learned.clone();
    spec.side_learned = learned.clone();
    spec.side_true = learned;
    spec.scale_factor = rng.random_range(0.4..1.6);
    spec.mean_offset = if rng.random_bool(0.5) { rng.random_range(-1.0..1.0) } else { 0.0 };
    let scales = if rng.random_bool(0.5) {
        ScaleDescriptor::default()
    } else {
        ScaleDescriptor {
            count: rng.random_range(1..=40),
            min: rng.random_range(0.05..0.5),
            max: rng.random_range(8.0..64.0),
        }
    };
    spec.scales = scales.table().unwrap();
    let precision = [12, 14, 16, 16][rng.random_range(0..4)];
    let method = random_method(&mut rng);
    let factorized = random_config(&mut rng, method);
    let method = random_method(&mut rng);
    let hyperprior = random_config(&mut rng, method);
    let options = EncodeOptions {
        factorized,
        hyperprior,
        precision,
    };
    if hyper {
        let out = synthesize(&spec).unwrap();
        Case {
            main: out.main,
            side: Some((out.side, out.side_info)),
            tables: out.tables,
            scales,
            options,
        }
    } else {
        let (main, tables) = synthesize_factorized(&spec).unwrap();
        Case {
            main,
            side: None,
            tables,
            scales,
            options,
        }
    }
}

/// Neumaier-compensated sum.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Standard normal cdf from the complementary error function.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Discretized zero-mean Gaussian on `[-m, m]` with the tail mass folded
/// into the edge bins, matching clamped sampling.
pub fn clamped_gaussian(sigma: f64, m: i32) -> Vec<f64> {
    (-m..=m)
        .map(|x| {
            let hi = if x == m { 1.0 } else { phi((f64::from(x) + 0.5) / sigma) };
            let lo = if x == -m { 0.0 } else { phi((f64::from(x) - 0.5) / sigma) };
            hi - lo
        })
        .collect()
}
