//! Seeded dataset generators.
//!
//! Every instance draws from its own ChaCha stream keyed by `(seed, index)`,
//! so generation order (serial or parallel) never changes the output bits.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChannelError, ChannelInstance, Dataset, GeneratorTag, Geometry};

/// Stream used for instance `index` of a dataset seeded with `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathLossBase {
    /// `148.1 + 37.6 log10(d_km)`.
    #[default]
    Log10,
    /// The same model with a base-2 logarithm, kept for comparison only.
    Log2,
}

/// Path loss in dB at `d_m` meters.
pub fn path_loss_db(d_m: f64, base: PathLossBase) -> f64 {
    let d_km = d_m / 1000.0;
    let log = match base {
        PathLossBase::Log10 => d_km.log10(),
        PathLossBase::Log2 => d_km.log2(),
    };
    148.1 + 37.6 * log
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub weighted: bool,
    pub noise_power: f64,
    pub p_max: f64,
}

impl GaussianConfig {
    pub fn new(k: usize, n: usize, seed: u64, weighted: bool) -> Self {
        Self {
            k,
            n,
            seed,
            weighted,
            noise_power: 1.0,
            p_max: 1.0,
        }
    }
}

/// Real standard-normal channels, unit (or uniform `[0,1]`) weights.
pub fn gen_gaussian(cfg: &GaussianConfig) -> Result<Dataset, ChannelError> {
    if cfg.k == 0 || cfg.n == 0 {
        return Err(ChannelError::InvalidParameter(
            "gaussian: K and n must be at least 1".into(),
        ));
    }
    let k = cfg.k;
    let instances = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(cfg.seed, i as u64);
            let h = (0..k * k)
                .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
                .collect();
            let weights = if cfg.weighted {
                (0..k).map(|_| rng.random::<f64>()).collect()
            } else {
                vec![1.0; k]
            };
            ChannelInstance::new(k, h, weights, vec![cfg.noise_power; k], cfg.p_max, None)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(instances, cfg.seed, GeneratorTag::Gaussian)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricConfig {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    /// Side of the square transmitter area, meters.
    pub area_m: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Watts.
    pub p_max: f64,
    pub noise_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub shadowing_db: f64,
    pub path_loss: PathLossBase,
    /// Draw small-scale fading; when false `g = 1`.
    pub fading: bool,
    /// Draw log-normal shadowing; when false `s = 1`.
    pub shadowing: bool,
}

impl GeometricConfig {
    pub fn new(k: usize, n: usize, seed: u64) -> Self {
        Self {
            k,
            n,
            seed,
            area_m: 100.0,
            d_min: 2.0,
            d_max: 10.0,
            p_max: 1.0,
            noise_dbm: -102.0,
            antenna_gain_dbi: 9.0,
            shadowing_db: 8.0,
            path_loss: PathLossBase::Log10,
            fading: true,
            shadowing: true,
        }
    }

    fn check(&self) -> Result<(), ChannelError> {
        if self.k == 0 || self.n == 0 {
            return Err(ChannelError::InvalidParameter(
                "geometric: K and n must be at least 1".into(),
            ));
        }
        if !(self.area_m > 0.0) {
            return Err(ChannelError::InvalidParameter(
                "area must be positive".into(),
            ));
        }
        if !(self.d_min > 0.0 && self.d_min <= self.d_max) {
            return Err(ChannelError::InvalidParameter(format!(
                "need 0 < d_min <= d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }
}

fn geometric_instance(
    cfg: &GeometricConfig,
    d_min: f64,
    d_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ChannelInstance, ChannelError> {
    let k = cfg.k;
    let mut tx = Vec::with_capacity(k);
    let mut rx = Vec::with_capacity(k);
    for _ in 0..k {
        let t = [
            rng.random::<f64>() * cfg.area_m,
            rng.random::<f64>() * cfg.area_m,
        ];
        let r = if d_max > d_min {
            rng.random_range(d_min..=d_max)
        } else {
            d_min
        };
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        tx.push(t);
        rx.push([t[0] + r * theta.cos(), t[1] + r * theta.sin()]);
    }
    let geometry = Geometry { tx, rx };
    let antenna = 10f64.powf(cfg.antenna_gain_dbi / 10.0);
    let shadow = Normal::new(0.0, cfg.shadowing_db)
        .map_err(|e| ChannelError::InvalidParameter(format!("shadowing deviation: {e}")))?;
    let mut h = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let d = geometry.distance(i, j);
            let amp = 10f64.powf(-path_loss_db(d, cfg.path_loss) / 20.0);
            let s = if cfg.shadowing {
                10f64.powf(shadow.sample(rng) / 10.0)
            } else {
                1.0
            };
            let g = if cfg.fading {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            } else {
                Complex64::new(1.0, 0.0)
            };
            h.push(g * (amp * (antenna * s).sqrt()));
        }
    }
    let noise = dbm_to_watts(cfg.noise_dbm);
    ChannelInstance::new(
        k,
        h,
        vec![1.0; k],
        vec![noise; k],
        cfg.p_max,
        Some(geometry),
    )
}

/// Transmitters uniform in a square, receivers at a uniform link distance.
pub fn gen_geometric(cfg: &GeometricConfig) -> Result<Dataset, ChannelError> {
    cfg.check()?;
    let instances = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(cfg.seed, i as u64);
            geometric_instance(cfg, cfg.d_min, cfg.d_max, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(instances, cfg.seed, GeneratorTag::Geometric)
}

/// Per-sample link-distance bounds: `l ~ U[lo, hi]`, `u ~ U[l, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarDistanceConfig {
    pub base: GeometricConfig,
    pub lo: f64,
    pub hi: f64,
}

impl VarDistanceConfig {
    pub fn new(k: usize, n: usize, seed: u64) -> Self {
        Self {
            base: GeometricConfig::new(k, n, seed),
            lo: 2.0,
            hi: 20.0,
        }
    }
}

pub fn gen_geometric_var_distance(cfg: &VarDistanceConfig) -> Result<Dataset, ChannelError> {
    cfg.base.check()?;
    if !(cfg.lo > 0.0 && cfg.lo <= cfg.hi) {
        return Err(ChannelError::InvalidParameter(
            "need 0 < lo <= hi for link distances".into(),
        ));
    }
    let instances = (0..cfg.base.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(cfg.base.seed, i as u64);
            let (l, u) = var_distance_bounds(cfg.lo, cfg.hi, &mut rng);
            geometric_instance(&cfg.base, l, u, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(instances, cfg.base.seed, GeneratorTag::GeometricVarDistance)
}

pub(crate) fn var_distance_bounds(lo: f64, hi: f64, rng: &mut impl Rng) -> (f64, f64) {
    let l = rng.random_range(lo..=hi);
    let u = if l < hi { rng.random_range(l..=hi) } else { hi };
    (l, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_unweighted_is_real_with_unit_weights() {
        let d = gen_gaussian(&GaussianConfig::new(10, 1, 3, false)).unwrap();
        let c = &d.instances[0];
        assert_eq!(c.k(), 10);
        assert!(c.weights.iter().all(|&w| w == 1.0));
        assert!(c.h_matrix().iter().all(|z| z.im == 0.0));
        assert_eq!(c.noise, vec![1.0; 10]);
        assert_eq!(c.p_max, 1.0);
    }

    #[test]
    fn gaussian_single_pair() {
        let d = gen_gaussian(&GaussianConfig::new(1, 1, 3, false)).unwrap();
        assert_eq!(d.instances[0].h_matrix().len(), 1);
    }

    #[test]
    fn gaussian_weighted_in_unit_interval() {
        let d = gen_gaussian(&GaussianConfig::new(10, 50, 1, true)).unwrap();
        let ws: Vec<f64> = d.instances.iter().flat_map(|c| c.weights.clone()).collect();
        assert!(ws.iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert!(ws.iter().any(|&w| w < 0.5) && ws.iter().any(|&w| w > 0.5));
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(gen_gaussian(&GaussianConfig::new(0, 1, 0, false)).is_err());
        assert!(gen_gaussian(&GaussianConfig::new(1, 0, 0, false)).is_err());
        let mut g = GeometricConfig::new(3, 1, 0);
        g.d_min = 11.0;
        assert!(gen_geometric(&g).is_err());
    }

    #[test]
    fn equal_distance_bounds_share_path_loss() {
        let mut cfg = GeometricConfig::new(6, 3, 9);
        cfg.d_min = 5.0;
        cfg.d_max = 5.0;
        cfg.fading = false;
        cfg.shadowing = false;
        let d = gen_geometric(&cfg).unwrap();
        let antenna = 10f64.powf(0.9);
        let expected = 10f64.powf(-path_loss_db(5.0, PathLossBase::Log10) / 20.0) * antenna.sqrt();
        for c in &d.instances {
            for k in 0..c.k() {
                assert!((c.magnitude(k, k) / expected - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_fading_follows_path_loss_formula() {
        let mut cfg = GeometricConfig::new(5, 2, 4);
        cfg.fading = false;
        cfg.shadowing = false;
        let d = gen_geometric(&cfg).unwrap();
        let phi = 10f64.powf(0.9);
        for c in &d.instances {
            let g = c.geometry.as_ref().unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let want = 10f64.powf(-path_loss_db(g.distance(i, j), cfg.path_loss) / 20.0)
                        * phi.sqrt();
                    assert!((c.magnitude(i, j) / want - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn noise_floor_is_minus_102_dbm() {
        let d = gen_geometric(&GeometricConfig::new(2, 1, 0)).unwrap();
        let s = d.instances[0].noise[0];
        assert!((10.0 * (s / 1e-3).log10() + 102.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_upper_bound() {
        let mut rng = instance_rng(0, 0);
        let (l, u) = var_distance_bounds(20.0, 20.0, &mut rng);
        assert_eq!((l, u), (20.0, 20.0));
    }

    #[test]
    fn path_loss_reference_values() {
        // 1 km is the model's reference distance.
        assert!((path_loss_db(1000.0, PathLossBase::Log10) - 148.1).abs() < 1e-12);
        assert!((path_loss_db(10.0, PathLossBase::Log10) - (148.1 - 75.2)).abs() < 1e-9);
        assert!((path_loss_db(500.0, PathLossBase::Log2) - (148.1 - 37.6)).abs() < 1e-9);
    }
}
