//! Straight-line reference implementation and random instance generators.
#![allow(dead_code, clippy::needless_range_loop)]

use gazepool_core::{ClassifierHead, FeatureMap, GridDims, TaskKind};

/// Small deterministic generator so tests do not depend on the library's RNG plumbing.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.next_u64() as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.unit() * n as f64) as usize
    }
}

pub struct Instance {
    pub features: FeatureMap,
    pub head: ClassifierHead,
    /// Fixations in grid coordinates.
    pub points: Vec<(f64, f64)>,
    pub sigma: f64,
    pub max_pooling: bool,
}

pub fn random_instance(rng: &mut Lcg, kind: TaskKind) -> Instance {
    let c = 1 + rng.below(4);
    let grid = GridDims::new(1 + rng.below(6), 1 + rng.below(6));
    let k = 1 + rng.below(3);
    let data = (0..c * grid.cells()).map(|_| rng.range(0.0, 2.0) as f32).collect();
    let features = FeatureMap::new("img", c, grid, data).unwrap();
    let rows = match kind {
        TaskKind::Category => k,
        TaskKind::Attribute => 2 * k,
    };
    let weights = (0..rows * c).map(|_| rng.range(-3.0, 3.0) as f32).collect();
    let bias = (0..rows).map(|_| rng.range(-1.0, 1.0) as f32).collect();
    let labels = (0..k).map(|i| format!("l{i}")).collect();
    let head = ClassifierHead::new(kind, labels, c, weights, bias).unwrap();
    let n = 1 + rng.below(5);
    let points = (0..n)
        .map(|_| (rng.range(0.0, grid.width as f64), rng.range(0.0, grid.height as f64)))
        .collect();
    Instance {
        features,
        head,
        points,
        sigma: [1.0, 1.2, 1.4, 1.6, 1.8, 2.0][rng.below(6)],
        max_pooling: rng.below(2) == 1,
    }
}

/// Fixation density map by nested loops: truncated Gaussians at cell centres,
/// pooled by sum or max, scaled to mean one and stored as f32.
pub fn oracle_fdm(points: &[(f64, f64)], h: usize, w: usize, sigma: f64, max_pooling: bool) -> Vec<f32> {
    let radius = 3.0 * sigma;
    let mut raw = vec![0.0f64; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f64;
            for &(u, v) in points {
                let dx = c as f64 + 0.5 - u;
                let dy = r as f64 + 0.5 - v;
                let d2 = dx * dx + dy * dy;
                let g = if d2.sqrt() <= radius {
                    (-d2 / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                };
                if max_pooling {
                    if g > acc {
                        acc = g;
                    }
                } else {
                    acc += g;
                }
            }
            raw[r * w + c] = acc;
        }
    }
    let mut total = 0.0;
    for v in &raw {
        total += v;
    }
    let mean = total / (h * w) as f64;
    raw.iter().map(|v| (v / mean) as f32).collect()
}

/// Logits of the gaze-weighted, average-pooled features by nested loops.
pub fn oracle_logits(f: &FeatureMap, fdm: &[f32], head: &ClassifierHead) -> Vec<f64> {
    let c_n = f.channels();
    let (h, w) = (f.grid().height, f.grid().width);
    let mut pooled = vec![0.0f64; c_n];
    for k in 0..c_n {
        let mut s = 0.0f64;
        for r in 0..h {
            for c in 0..w {
                let weighted = (f.get(k, r, c) as f64 * fdm[r * w + c] as f64) as f32;
                s += weighted as f64;
            }
        }
        pooled[k] = s / (h * w) as f64;
    }
    let rows = head.bias().len();
    let mut z = vec![0.0f64; rows];
    for (j, zj) in z.iter_mut().enumerate() {
        let mut s = head.bias()[j] as f64;
        for k in 0..c_n {
            s += head.weights()[j * c_n + k] as f64 * pooled[k];
        }
        *zj = s;
    }
    z
}

/// Per-image posterior by nested loops over channels, rows and columns.
pub fn oracle_posterior(f: &FeatureMap, fdm: &[f32], head: &ClassifierHead) -> Vec<f64> {
    let z = oracle_logits(f, fdm, head);
    let softmax = |z: &[f64]| {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let t: f64 = e.iter().sum();
        e.iter().map(|v| v / t).collect::<Vec<f64>>()
    };
    match head.kind() {
        TaskKind::Category => softmax(&z),
        TaskKind::Attribute => z.chunks(2).map(|pair| softmax(pair)[1]).collect(),
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
