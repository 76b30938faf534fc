//! OFDM link-level evaluation over channel impulse responses.
//!
//! The transmit side is a uniform planar array in the y-z plane of its
//! array frame (boresight +x); element (i_x, i_y) sits at (0, i_x·d, i_y·d)
//! with d in wavelengths. A DFT codebook supplies the beams. Per beam and
//! subcarrier the received signal power is combined with thermal noise and
//! optional fixed-beam interferers into an SINR, reduced to a
//! capacity-equivalent effective SINR, a logistic BLER, and an achievable
//! rate. The receiver is a single antenna; beamforming is transmit-side.

use num_complex::Complex64;
use thiserror::Error;

use crate::bus::Header;
use crate::raytracer::Cir;
use crate::timebase::SimTime;
use crate::wire::{put_f64, put_u16, put_u32, Reader, WireError};
use crate::{Pose, Quat, Vec3, BOLTZMANN};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("array must have at least one element per axis")]
    EmptyArray,
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("OFDM config invalid: {0}")]
    BadOfdm(&'static str),
}

/// Uniform planar array geometry and its mounting pose on the platform.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub n_x: usize,
    pub n_y: usize,
    /// Element pitch in wavelengths (half-wavelength by default).
    pub spacing_wavelengths: f64,
    /// Array frame relative to the platform body.
    pub mount: Pose,
}

impl ArrayConfig {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self, LinkError> {
        if n_x == 0 || n_y == 0 {
            return Err(LinkError::EmptyArray);
        }
        Ok(Self {
            n_x,
            n_y,
            spacing_wavelengths: 0.5,
            mount: Pose::identity(),
        })
    }

    pub fn elements(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Element position in wavelengths, array frame; index n = i_x·n_y + i_y.
    pub fn element_position(&self, n: usize) -> Vec3 {
        let ix = (n / self.n_y) as f64;
        let iy = (n % self.n_y) as f64;
        Vec3::new(
            0.0,
            ix * self.spacing_wavelengths,
            iy * self.spacing_wavelengths,
        )
    }
}

/// Unit-norm array response for a unit direction in the array frame:
/// element n carries exp(j·2π·(p_n · û)) / √N with p_n in wavelengths.
pub fn steering_vector(array: &ArrayConfig, direction: Vec3) -> Vec<Complex64> {
    debug_assert!(direction.is_unit(), "direction must be unit length");
    let n = array.elements();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|i| {
            let phase = std::f64::consts::TAU * array.element_position(i).dot(direction);
            Complex64::from_polar(scale, phase)
        })
        .collect()
}

/// DFT beam codebook over the array: beam b = i_x·n_y + i_y applies phase
/// progression 2π i_x/n_x along x-indexed elements and 2π i_y/n_y along y.
#[derive(Debug, Clone, PartialEq)]
pub struct DftCodebook {
    pub n_x: usize,
    pub n_y: usize,
    weights: Vec<Vec<Complex64>>,
}

impl DftCodebook {
    pub fn new(array: &ArrayConfig) -> Result<Self, LinkError> {
        let (n_x, n_y) = (array.n_x, array.n_y);
        let n = n_x * n_y;
        if n == 0 {
            return Err(LinkError::EmptyCodebook);
        }
        let scale = 1.0 / (n as f64).sqrt();
        let mut weights = Vec::with_capacity(n);
        for bx in 0..n_x {
            for by in 0..n_y {
                let w = (0..n)
                    .map(|e| {
                        let jx = (e / n_y) as f64;
                        let jy = (e % n_y) as f64;
                        let phase = std::f64::consts::TAU
                            * (jx * bx as f64 / n_x as f64 + jy * by as f64 / n_y as f64);
                        Complex64::from_polar(scale, phase)
                    })
                    .collect();
                weights.push(w);
            }
        }
        Ok(Self { n_x, n_y, weights })
    }

    pub fn beam_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, beam: usize) -> &[Complex64] {
        &self.weights[beam]
    }
}

/// OFDM numerology plus the receiver noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
}

impl OfdmConfig {
    pub fn new(n_subcarriers: usize, subcarrier_spacing_hz: f64, noise_figure_db: f64) -> Result<Self, LinkError> {
        if n_subcarriers == 0 {
            return Err(LinkError::BadOfdm("subcarrier count must be >= 1"));
        }
        if !(subcarrier_spacing_hz > 0.0) {
            return Err(LinkError::BadOfdm("subcarrier spacing must be positive"));
        }
        Ok(Self {
            n_subcarriers,
            subcarrier_spacing_hz,
            noise_figure_db,
            temperature_k: 290.0,
        })
    }

    /// Thermal noise power per subcarrier (W): k_B·T·Δf·10^{NF/10}.
    pub fn noise_power_w(&self) -> f64 {
        BOLTZMANN
            * self.temperature_k
            * self.subcarrier_spacing_hz
            * 10f64.powf(self.noise_figure_db / 10.0)
    }
}

/// Logistic block-error-rate curve: BLER = 1/(1 + e^{s·(SINR_dB − θ)}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerCurve {
    pub threshold_db: f64,
    pub slope_per_db: f64,
}

impl Default for BlerCurve {
    fn default() -> Self {
        Self {
            threshold_db: 5.0,
            slope_per_db: 1.0,
        }
    }
}

impl BlerCurve {
    pub fn bler(&self, sinr_eff_db: f64) -> f64 {
        if sinr_eff_db == f64::NEG_INFINITY {
            return 1.0;
        }
        1.0 / (1.0 + (self.slope_per_db * (sinr_eff_db - self.threshold_db)).exp())
    }
}

/// Per-element channel frequency response H[n, k]: `n_elements` rows over
/// `n_subcarriers` baseband-centered subcarriers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    pub n_elements: usize,
    pub n_subcarriers: usize,
    h: Vec<Complex64>,
}

impl Cfr {
    pub fn zeros(n_elements: usize, n_subcarriers: usize) -> Self {
        Self {
            n_elements,
            n_subcarriers,
            h: vec![Complex64::new(0.0, 0.0); n_elements * n_subcarriers],
        }
    }

    pub fn at(&self, element: usize, subcarrier: usize) -> Complex64 {
        self.h[element * self.n_subcarriers + subcarrier]
    }

    fn add(&mut self, element: usize, subcarrier: usize, v: Complex64) {
        self.h[element * self.n_subcarriers + subcarrier] += v;
    }

    /// |w^H H[:,k]|² for every subcarrier k.
    pub fn beamformed_power(&self, w: &[Complex64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_elements, "weight length mismatch");
        (0..self.n_subcarriers)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..self.n_elements {
                    acc += w[n].conj() * self.at(n, k);
                }
                acc.norm_sqr()
            })
            .collect()
    }
}

/// Expands a CIR into the per-element frequency response:
///
/// H[n,k] = Σ_p a_p · [v(û_dep,p)]_n · √N · e^{−j2πΔf·k'·τ_p},
/// k' = k − (N_sc−1)/2.
///
/// The √N undoes the steering-vector normalization so a single-element
/// array reproduces a_p exactly. `array_world_rotation` orients the array
/// frame in the world (platform rotation composed with the mount).
pub fn cir_to_cfr(
    cir: &Cir,
    array: &ArrayConfig,
    array_world_rotation: Quat,
    ofdm: &OfdmConfig,
) -> Cfr {
    let n = array.elements();
    let n_sc = ofdm.n_subcarriers;
    let mut cfr = Cfr::zeros(n, n_sc);
    let root_n = (n as f64).sqrt();
    let to_array = array_world_rotation.conjugate();
    let center = (n_sc as f64 - 1.0) / 2.0;
    for path in &cir.paths {
        let dep_array = to_array.rotate(path.dep_dir);
        let v = steering_vector(array, dep_array);
        for k in 0..n_sc {
            let kp = k as f64 - center;
            let phase = -std::f64::consts::TAU * ofdm.subcarrier_spacing_hz * kp * path.delay;
            let tone = Complex64::from_polar(1.0, phase);
            for (e, &ve) in v.iter().enumerate() {
                cfr.add(e, k, path.amplitude * ve * root_n * tone);
            }
        }
    }
    cfr
}

/// A co-channel transmitter with a fixed beam, contributing interference.
/// It carries its own beam weights: its array need not match the serving
/// transmitter's.
#[derive(Debug, Clone)]
pub struct Interferer {
    pub cfr: Cfr,
    pub weights: Vec<Complex64>,
    pub power_dbm: f64,
}

/// Link KPIs for one (stamp, tx, rx) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkKpi {
    pub stamp: SimTime,
    pub tx_id: u32,
    pub rx_id: u32,
    pub best_beam: u16,
    pub sinr_eff_db: f64,
    pub bler: f64,
    pub rate_bpshz: f64,
    pub per_beam_sinr_db: Vec<f64>,
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        10.0 * linear.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Sweeps every codebook beam over the CFR and reduces to KPIs.
///
/// Per beam b and subcarrier k: S = (P_tx/N_sc)·|w_b^H H[:,k]|², noise
/// N₀ = k_B·T·Δf·10^{NF/10}, interference from each interferer's fixed
/// beam. The per-beam effective SINR is the capacity-equivalent
/// 2^{mean_k log₂(1+SINR_k)} − 1; the best beam maximizes it (ties to the
/// lowest index); rate = mean_k log₂(1+SINR_k) at the best beam.
pub fn evaluate_link(
    h: &Cfr,
    codebook: &DftCodebook,
    ofdm: &OfdmConfig,
    tx_power_dbm: f64,
    bler_curve: &BlerCurve,
    interferers: &[Interferer],
    stamp: SimTime,
    tx_id: u32,
    rx_id: u32,
) -> Result<LinkKpi, LinkError> {
    if codebook.beam_count() == 0 {
        return Err(LinkError::EmptyCodebook);
    }
    if h.n_elements != codebook.n_x * codebook.n_y {
        return Err(LinkError::DimensionMismatch {
            what: "CFR elements vs codebook",
            expected: codebook.n_x * codebook.n_y,
            got: h.n_elements,
        });
    }
    if h.n_subcarriers != ofdm.n_subcarriers {
        return Err(LinkError::DimensionMismatch {
            what: "CFR subcarriers vs OFDM config",
            expected: ofdm.n_subcarriers,
            got: h.n_subcarriers,
        });
    }
    let n_sc = ofdm.n_subcarriers;
    let noise = ofdm.noise_power_w();

    // Interference is beam-independent: each interferer transmits on its
    // own fixed beam.
    let mut interference = vec![0.0f64; n_sc];
    for intf in interferers {
        if intf.cfr.n_subcarriers != n_sc {
            return Err(LinkError::DimensionMismatch {
                what: "interferer subcarriers",
                expected: n_sc,
                got: intf.cfr.n_subcarriers,
            });
        }
        if intf.cfr.n_elements != intf.weights.len() {
            return Err(LinkError::DimensionMismatch {
                what: "interferer weights vs its CFR",
                expected: intf.cfr.n_elements,
                got: intf.weights.len(),
            });
        }
        let p = dbm_to_watts(intf.power_dbm) / n_sc as f64;
        let w = intf.cfr.beamformed_power(&intf.weights);
        for k in 0..n_sc {
            interference[k] += p * w[k];
        }
    }

    let p_per_sc = dbm_to_watts(tx_power_dbm) / n_sc as f64;
    let mut best_beam = 0usize;
    let mut best_eff = f64::NEG_INFINITY;
    let mut best_log_mean = 0.0f64;
    let mut per_beam_sinr_db = Vec::with_capacity(codebook.beam_count());
    for b in 0..codebook.beam_count() {
        let gains = h.beamformed_power(codebook.weight(b));
        let mut log_sum = 0.0;
        for k in 0..n_sc {
            let sinr = p_per_sc * gains[k] / (noise + interference[k]);
            log_sum += (1.0 + sinr).log2();
        }
        let log_mean = log_sum / n_sc as f64;
        let eff = 2f64.powf(log_mean) - 1.0;
        per_beam_sinr_db.push(to_db(eff));
        if eff > best_eff {
            best_eff = eff;
            best_beam = b;
            best_log_mean = log_mean;
        }
    }

    let sinr_eff_db = to_db(best_eff);
    Ok(LinkKpi {
        stamp,
        tx_id,
        rx_id,
        best_beam: best_beam as u16,
        sinr_eff_db,
        bler: bler_curve.bler(sinr_eff_db),
        rate_bpshz: best_log_mean,
        per_beam_sinr_db,
    })
}

impl LinkKpi {
    pub fn header(&self, frame_id: &str) -> Header {
        Header {
            stamp: self.stamp,
            frame_id: frame_id.to_string(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        put_u32(&mut buf, self.tx_id);
        put_u32(&mut buf, self.rx_id);
        put_u16(&mut buf, self.best_beam);
        put_f64(&mut buf, self.sinr_eff_db);
        put_f64(&mut buf, self.bler);
        put_f64(&mut buf, self.rate_bpshz);
        put_u16(&mut buf, self.per_beam_sinr_db.len() as u16);
        for &s in &self.per_beam_sinr_db {
            put_f64(&mut buf, s);
        }
        buf
    }

    pub fn decode(stamp: SimTime, payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(payload);
        let tx_id = r.u32("tx_id")?;
        let rx_id = r.u32("rx_id")?;
        let best_beam = r.u16("best beam")?;
        let sinr_eff_db = r.f64("effective sinr")?;
        let bler = r.f64("bler")?;
        let rate_bpshz = r.f64("rate")?;
        let n = r.u16("beam count")? as usize;
        let mut per_beam_sinr_db = Vec::with_capacity(n);
        for _ in 0..n {
            per_beam_sinr_db.push(r.f64("per-beam sinr")?);
        }
        r.finish()?;
        Ok(Self {
            stamp,
            tx_id,
            rx_id,
            best_beam,
            sinr_eff_db,
            bler,
            rate_bpshz,
            per_beam_sinr_db,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::SplitMix64;
    use crate::raytracer::{compute_paths, RadioEndpoint, RtConfig, RtScene};

    fn unit_dir(rng: &mut SplitMix64) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn boresight_cir(d: f64) -> Cir {
        let scene = RtScene::empty();
        let cfg = RtConfig::new(3.5e9, 0, 30.0).unwrap();
        let tx = RadioEndpoint::fixed(Vec3::zero());
        let rx = RadioEndpoint::fixed(Vec3::new(d, 0.0, 0.0));
        Cir {
            stamp: SimTime::ZERO,
            tx_id: 0,
            rx_id: 1,
            paths: compute_paths(&tx, &rx, &scene, &cfg),
        }
    }

    #[test]
    fn broadside_steering_is_uniform() {
        let array = ArrayConfig::new(8, 8).unwrap();
        let v = steering_vector(&array, Vec3::new(1.0, 0.0, 0.0));
        for e in &v {
            assert!((e - Complex64::new(1.0 / 8.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_vectors_are_unit_norm() {
        let array = ArrayConfig::new(8, 8).unwrap();
        let mut rng = SplitMix64::substream(3, "steering-norm");
        for _ in 0..100 {
            let v = steering_vector(&array, unit_dir(&mut rng));
            let norm: f64 = v.iter().map(|e| e.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_beams_peak_on_their_matching_directions() {
        let array = ArrayConfig::new(8, 8).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        // Beam (b_x, b_y) matches the direction whose y/z direction
        // cosines are b/(n·spacing), folded into [−1, 1).
        for bx in 0..8usize {
            for by in 0..8usize {
                let fold = |b: usize, n: usize| -> f64 {
                    let f = b as f64 / n as f64;
                    let f = if f >= 0.5 { f - 1.0 } else { f };
                    f / 0.5
                };
                let uy = fold(bx, 8);
                let uz = fold(by, 8);
                let planar = uy * uy + uz * uz;
                if planar >= 0.98 {
                    continue; // grazing directions excluded
                }
                let dir = Vec3::new((1.0 - planar).sqrt(), uy, uz);
                let v = steering_vector(&array, dir);
                let scores: Vec<f64> = (0..book.beam_count())
                    .map(|b| {
                        book.weight(b)
                            .iter()
                            .zip(&v)
                            .map(|(w, e)| w.conj() * e)
                            .sum::<Complex64>()
                            .norm()
                    })
                    .collect();
                let argmax = scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap()
                    .0;
                assert_eq!(argmax, bx * 8 + by, "beam ({bx},{by})");
                assert!((scores[argmax] - 1.0).abs() < 1e-9, "matched beam is lossless");
            }
        }
    }

    #[test]
    fn codebook_is_unitary() {
        let array = ArrayConfig::new(8, 8).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let mut rng = SplitMix64::substream(4, "parseval");
        for _ in 0..20 {
            let v = steering_vector(&array, unit_dir(&mut rng));
            let total: f64 = (0..book.beam_count())
                .map(|b| {
                    book.weight(b)
                        .iter()
                        .zip(&v)
                        .map(|(w, e)| w.conj() * e)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-9, "Parseval violated: {total}");
        }
    }

    #[test]
    fn single_element_single_subcarrier_reproduces_amplitude() {
        let cir = boresight_cir(100.0);
        let array = ArrayConfig::new(1, 1).unwrap();
        let ofdm = OfdmConfig::new(1, 15e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        assert_eq!((h.n_elements, h.n_subcarriers), (1, 1));
        assert!((h.at(0, 0) - cir.paths[0].amplitude).norm() < 1e-15);
    }

    #[test]
    fn single_path_cfr_is_flat() {
        let cir = boresight_cir(250.0);
        let array = ArrayConfig::new(4, 4).unwrap();
        let ofdm = OfdmConfig::new(64, 30e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        let reference = h.at(0, 0).norm();
        for n in 0..16 {
            for k in 0..64 {
                assert!((h.at(n, k).norm() - reference).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_path_interference_period_is_one_over_df_dtau() {
        // Δτ = 100 ns, Δf = 100 kHz → period 100 subcarriers exactly.
        let mk_path = |delay: f64| crate::raytracer::PropPath {
            kind: crate::raytracer::PathKind::Los,
            vertices: vec![Vec3::zero(), Vec3::new(1.0, 0.0, 0.0)],
            triangles: vec![],
            length: delay * crate::SPEED_OF_LIGHT,
            delay,
            amplitude: Complex64::new(0.5, 0.0),
            dep_dir: Vec3::new(1.0, 0.0, 0.0),
            arr_dir: Vec3::new(1.0, 0.0, 0.0),
            doppler_hz: 0.0,
        };
        let cir = Cir {
            stamp: SimTime::ZERO,
            tx_id: 0,
            rx_id: 1,
            paths: vec![mk_path(0.0), mk_path(100e-9)],
        };
        let array = ArrayConfig::new(1, 1).unwrap();
        let ofdm = OfdmConfig::new(300, 100e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        for k in 0..200 {
            let a = h.at(0, k).norm_sqr();
            let b = h.at(0, k + 100).norm_sqr();
            assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
        }
        // And it actually varies inside a period.
        let values: Vec<f64> = (0..100).map(|k| h.at(0, k).norm_sqr()).collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.1);
    }

    #[test]
    fn boresight_los_selects_the_zero_slope_beam() {
        let cir = boresight_cir(120.0);
        let array = ArrayConfig::new(8, 8).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(64, 15e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        let kpi = evaluate_link(
            &h,
            &book,
            &ofdm,
            30.0,
            &BlerCurve::default(),
            &[],
            SimTime::ZERO,
            0,
            1,
        )
        .unwrap();
        assert_eq!(kpi.best_beam, 0, "boresight matches the flat DFT beam");
        // Exhaustive sweep: beam 0 strictly beats every other beam.
        for b in 1..book.beam_count() {
            assert!(kpi.per_beam_sinr_db[0] > kpi.per_beam_sinr_db[b]);
        }
        // Array gain over one element: N× in power = 10log10(64) ≈ 18.06 dB.
        let single = ArrayConfig::new(1, 1).unwrap();
        let h1 = cir_to_cfr(&cir, &single, Quat::identity(), &ofdm);
        let kpi1 = evaluate_link(
            &h1,
            &DftCodebook::new(&single).unwrap(),
            &ofdm,
            30.0,
            &BlerCurve::default(),
            &[],
            SimTime::ZERO,
            0,
            1,
        )
        .unwrap();
        let gain = kpi.sinr_eff_db - kpi1.sinr_eff_db;
        assert!((gain - 10.0 * 64f64.log10()).abs() < 0.01, "gain {gain}");
    }

    #[test]
    fn outage_yields_zero_rate_and_unit_bler() {
        let array = ArrayConfig::new(4, 4).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(16, 15e3, 7.0).unwrap();
        let h = Cfr::zeros(16, 16);
        let kpi = evaluate_link(
            &h,
            &book,
            &ofdm,
            30.0,
            &BlerCurve::default(),
            &[],
            SimTime::ZERO,
            0,
            1,
        )
        .unwrap();
        assert_eq!(kpi.best_beam, 0);
        assert_eq!(kpi.rate_bpshz, 0.0);
        assert_eq!(kpi.sinr_eff_db, f64::NEG_INFINITY);
        assert!(kpi.bler > 0.999);
    }

    #[test]
    fn power_scaling_shifts_sinr_and_keeps_the_beam() {
        let cir = boresight_cir(400.0);
        let array = ArrayConfig::new(8, 8).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(32, 15e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        let eval = |p_dbm: f64| {
            evaluate_link(
                &h,
                &book,
                &ofdm,
                p_dbm,
                &BlerCurve::default(),
                &[],
                SimTime::ZERO,
                0,
                1,
            )
            .unwrap()
        };
        let base = eval(10.0);
        let double = eval(10.0 + 10.0 * 2f64.log10());
        assert_eq!(base.best_beam, double.best_beam);
        assert!(
            (double.sinr_eff_db - base.sinr_eff_db - 10.0 * 2f64.log10()).abs() < 1e-6,
            "doubling P_tx must add 3.01 dB in the noise-limited regime"
        );
        // Full 60 dB sweep never changes the argmax, rate never decreases.
        let mut last_rate = 0.0;
        for step in 0..=12 {
            let kpi = eval(-20.0 + 5.0 * step as f64);
            assert_eq!(kpi.best_beam, base.best_beam);
            assert!(kpi.rate_bpshz >= last_rate);
            last_rate = kpi.rate_bpshz;
        }
    }

    #[test]
    fn scalar_link_budget_matches_closed_form() {
        let cir = boresight_cir(100.0);
        let array = ArrayConfig::new(1, 1).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(1, 15e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        let p_dbm = 24.0;
        let kpi = evaluate_link(
            &h,
            &book,
            &ofdm,
            p_dbm,
            &BlerCurve::default(),
            &[],
            SimTime::ZERO,
            0,
            1,
        )
        .unwrap();
        let a2 = cir.paths[0].amplitude.norm_sqr();
        let snr = dbm_to_watts(p_dbm) * a2 / ofdm.noise_power_w();
        let expect_db = 10.0 * snr.log10();
        assert!(
            (kpi.sinr_eff_db - expect_db).abs() < 1e-9 * expect_db.abs(),
            "{} vs {expect_db}",
            kpi.sinr_eff_db
        );
    }

    #[test]
    fn bler_curve_shape() {
        let curve = BlerCurve::default();
        assert!((curve.bler(5.0) - 0.5).abs() < 1e-12);
        assert!(curve.bler(-20.0) > 0.999_999);
        assert!(curve.bler(30.0) < 1e-10);
        let mut last = 1.0;
        for s in -30..30 {
            let b = curve.bler(s as f64);
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn kpi_codec_round_trip() {
        let kpi = LinkKpi {
            stamp: SimTime::from_millis(1500),
            tx_id: 3,
            rx_id: 9,
            best_beam: 17,
            sinr_eff_db: 12.75,
            bler: 0.0003,
            rate_bpshz: 4.25,
            per_beam_sinr_db: vec![1.0, -3.5, f64::NEG_INFINITY, 12.75],
        };
        let back = LinkKpi::decode(kpi.stamp, &kpi.encode()).unwrap();
        assert_eq!(back, kpi);
    }

    #[test]
    fn interference_degrades_sinr_monotonically() {
        let cir = boresight_cir(200.0);
        let array = ArrayConfig::new(4, 4).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(16, 15e3, 7.0).unwrap();
        let h = cir_to_cfr(&cir, &array, Quat::identity(), &ofdm);
        // Interferer at the same spot, transmitting its own boresight beam.
        let intf_array = ArrayConfig::new(2, 2).unwrap();
        let intf_book = DftCodebook::new(&intf_array).unwrap();
        let intf_cir = boresight_cir(350.0);
        let intf_cfr = cir_to_cfr(&intf_cir, &intf_array, Quat::identity(), &ofdm);
        let eval = |intf_dbm: Option<f64>| {
            let interferers: Vec<Interferer> = intf_dbm
                .map(|p| Interferer {
                    cfr: intf_cfr.clone(),
                    weights: intf_book.weight(0).to_vec(),
                    power_dbm: p,
                })
                .into_iter()
                .collect();
            evaluate_link(
                &h,
                &book,
                &ofdm,
                30.0,
                &BlerCurve::default(),
                &interferers,
                SimTime::ZERO,
                0,
                1,
            )
            .unwrap()
            .sinr_eff_db
        };
        let clean = eval(None);
        let mild = eval(Some(0.0));
        let strong = eval(Some(30.0));
        assert!(clean > mild && mild > strong, "{clean} > {mild} > {strong}");
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let array = ArrayConfig::new(2, 2).unwrap();
        let book = DftCodebook::new(&array).unwrap();
        let ofdm = OfdmConfig::new(8, 15e3, 7.0).unwrap();
        let bad = Cfr::zeros(3, 8);
        let err = evaluate_link(
            &bad,
            &book,
            &ofdm,
            30.0,
            &BlerCurve::default(),
            &[],
            SimTime::ZERO,
            0,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, LinkError::DimensionMismatch { .. }));
    }
}
