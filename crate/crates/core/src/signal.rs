//! Complex-exponential signal model and replicated noisy observations.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngConfig;

/// Ground truth: `s_k = sum_j c_j xi_j^k`, observed at `n` samples with
/// noise of standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialModel {
    pub coeffs: Vec<Complex64>,
    pub nodes: Vec<Complex64>,
    pub n: usize,
    pub sigma: f64,
}

impl ExponentialModel {
    pub fn new(coeffs: Vec<Complex64>, nodes: Vec<Complex64>, n: usize, sigma: f64) -> Result<Self> {
        let model = Self {
            coeffs,
            nodes,
            n,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    /// The five-component test model with closely spaced nodes 3 and 4.
    pub fn reference(n: usize, sigma: f64) -> Result<Self> {
        let node = |damp: f64, freq: f64| Complex64::new(-damp, 2.0 * PI * freq).exp();
        let nodes = vec![
            node(0.1, -0.3),
            node(0.05, -0.28),
            node(0.0001, 0.2),
            node(0.0001, 0.21),
            node(0.3, -0.35),
        ];
        let coeffs = [6.0, 3.0, 1.0, 1.0, 20.0]
            .iter()
            .map(|&c| Complex64::new(c, 0.0))
            .collect();
        Self::new(coeffs, nodes, n, sigma)
    }

    pub fn p_star(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != self.nodes.len() || self.nodes.is_empty() {
            return Err(Error::InvalidModel(format!(
                "{} coefficients for {} nodes",
                self.coeffs.len(),
                self.nodes.len()
            )));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::OddSampleCount(self.n));
        }
        if self.n < 2 * self.p_star() {
            return Err(Error::InvalidModel(format!(
                "n = {} is smaller than 2 p* = {}",
                self.n,
                2 * self.p_star()
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidModel(format!("sigma = {}", self.sigma)));
        }
        if self.coeffs.iter().any(|c| c.norm() == 0.0) {
            return Err(Error::InvalidModel("zero amplitude".into()));
        }
        for (i, a) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|b| a == b) {
                return Err(Error::InvalidModel(format!("repeated node {a}")));
            }
        }
        Ok(())
    }

    /// Noiseless samples `s_0 .. s_{n-1}`.
    pub fn synthesize(&self) -> Vec<Complex64> {
        let mut powers = vec![Complex64::new(1.0, 0.0); self.p_star()];
        let mut out = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            out.push(self.coeffs.iter().zip(&powers).map(|(c, z)| c * z).sum());
            for (z, xi) in powers.iter_mut().zip(&self.nodes) {
                *z *= xi;
            }
        }
        out
    }
}

/// How the noise variance is split between real and imaginary parts.
///
/// `Circular` gives `E|eps|^2 = sigma^2` (variance `sigma^2 / 2` per part).
/// `PerComponent` puts `sigma^2` on each part; it only exists as a negative
/// control for the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    #[default]
    Circular,
    PerComponent,
}

impl NoiseConvention {
    fn component_std(self, sigma: f64) -> f64 {
        match self {
            NoiseConvention::Circular => sigma * std::f64::consts::FRAC_1_SQRT_2,
            NoiseConvention::PerComponent => sigma,
        }
    }
}

/// `R` noisy copies of a signal and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub data: Vec<Vec<Complex64>>,
    pub mean_signal: Vec<Complex64>,
    pub sigma: f64,
}

impl ReplicateSet {
    pub fn from_rows(data: Vec<Vec<Complex64>>, sigma: f64) -> Result<Self> {
        let n = data.first().map(Vec::len).unwrap_or(0);
        if data.is_empty() || data.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(
                "replicate rows must be non-empty and of equal length".into(),
            ));
        }
        let scale = 1.0 / data.len() as f64;
        let mean_signal = (0..n)
            .map(|k| data.iter().map(|row| row[k]).sum::<Complex64>() * scale)
            .collect();
        Ok(Self {
            data,
            mean_signal,
            sigma,
        })
    }

    pub fn replicates(&self) -> usize {
        self.data.len()
    }

    pub fn n(&self) -> usize {
        self.mean_signal.len()
    }

    /// Writes the replicate text matrix: a `n,R,sigma` header record followed by
    /// one `r,k,re,im` row per sample.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},{}", self.n(), self.replicates(), self.sigma)?;
        for (r, row) in self.data.iter().enumerate() {
            for (k, d) in row.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r, k, d.re, d.im)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty replicate file".into(),
        })?;
        let header = header?;
        let fields: Vec<&str> = header.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `n,R,sigma`".into(),
            });
        }
        let n: usize = parse_field(fields[0], 1)?;
        let reps: usize = parse_field(fields[1], 1)?;
        let sigma: f64 = parse_field(fields[2], 1)?;
        let mut data = vec![vec![Complex64::new(f64::NAN, f64::NAN); n]; reps];
        let mut seen = 0usize;
        for (i, line) in lines {
            let line = line?;
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `r,k,re,im`".into(),
                });
            }
            let r: usize = parse_field(f[0], line_no)?;
            let k: usize = parse_field(f[1], line_no)?;
            if r >= reps || k >= n {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index ({r}, {k}) out of range"),
                });
            }
            data[r][k] = Complex64::new(parse_field(f[2], line_no)?, parse_field(f[3], line_no)?);
            seen += 1;
        }
        if seen != n * reps {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {} samples, found {}", n * reps, seen),
            });
        }
        Self::from_rows(data, sigma)
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{}`", s.trim()),
    })
}

/// Adds circular complex Gaussian noise to `R` copies of `s`.
pub fn add_noise(s: &[Complex64], sigma: f64, replicates: usize, rng: &RngConfig) -> Result<ReplicateSet> {
    add_noise_with(s, sigma, replicates, rng, NoiseConvention::Circular)
}

pub fn add_noise_with(
    s: &[Complex64],
    sigma: f64,
    replicates: usize,
    rng: &RngConfig,
    convention: NoiseConvention,
) -> Result<ReplicateSet> {
    if !(sigma >= 0.0) || replicates == 0 {
        return Err(Error::InvalidArgument(format!(
            "need sigma >= 0 and R >= 1, got sigma = {sigma}, R = {replicates}"
        )));
    }
    let std = convention.component_std(sigma);
    let data = (0..replicates)
        .map(|r| {
            s.iter()
                .enumerate()
                .map(|(k, &sk)| {
                    if std == 0.0 {
                        return sk;
                    }
                    let mut g = rng.substream(&[r as u64, k as u64]);
                    let re: f64 = StandardNormal.sample(&mut g);
                    let im: f64 = StandardNormal.sample(&mut g);
                    sk + Complex64::new(std * re, std * im)
                })
                .collect()
        })
        .collect();
    ReplicateSet::from_rows(data, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn first_sample_is_sum_of_amplitudes() {
        let m = ExponentialModel::reference(74, 1.0).unwrap();
        let s = m.synthesize();
        assert_eq!(s.len(), 74);
        assert!((s[0] - c(31.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn powers_of_i() {
        let m = ExponentialModel::new(vec![c(2.0, 0.0)], vec![c(0.0, 1.0)], 4, 0.0).unwrap();
        let s = m.synthesize();
        let want = [c(2.0, 0.0), c(0.0, 2.0), c(-2.0, 0.0), c(0.0, -2.0)];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn second_sample_matches_direct_sum() {
        // s_1 = sum c_j xi_j, evaluated term by term from the polar form of each node.
        let m = ExponentialModel::reference(74, 1.0).unwrap();
        let polar = [
            (-0.1, -0.3),
            (-0.05, -0.28),
            (-0.0001, 0.2),
            (-0.0001, 0.21),
            (-0.3, -0.35),
        ];
        let amps = [6.0, 3.0, 1.0, 1.0, 20.0];
        let mut re = 0.0;
        let mut im = 0.0;
        for ((d, f), a) in polar.iter().zip(amps) {
            let r = f64::exp(*d);
            re += a * r * (2.0 * PI * f).cos();
            im += a * r * (2.0 * PI * f).sin();
        }
        let s = m.synthesize();
        assert!(
            (s[1].re - re).abs() < 1e-12 && (s[1].im - im).abs() < 1e-12,
            "{} vs {re}+{im}i",
            s[1]
        );
    }

    #[test]
    fn invalid_models_are_rejected() {
        let one = vec![c(1.0, 0.0)];
        assert!(ExponentialModel::new(one.clone(), one.clone(), 3, 0.0).is_err());
        assert!(ExponentialModel::new(one.clone(), one.clone(), 2, -1.0).is_err());
        assert!(ExponentialModel::new(vec![c(0.0, 0.0)], one.clone(), 2, 1.0).is_err());
        assert!(ExponentialModel::new(vec![c(1.0, 0.0); 2], vec![c(0.5, 0.0); 2], 4, 1.0).is_err());
        assert!(ExponentialModel::new(vec![c(1.0, 0.0); 2], vec![c(0.5, 0.0), c(0.2, 0.0)], 2, 1.0).is_err());
    }

    #[test]
    fn zero_noise_rows_equal_signal() {
        let m = ExponentialModel::reference(10, 0.0).unwrap();
        let s = m.synthesize();
        let reps = add_noise(&s, 0.0, 3, &RngConfig::new(1, "t")).unwrap();
        for row in &reps.data {
            assert_eq!(row, &s);
        }
        for (a, b) in reps.mean_signal.iter().zip(&s) {
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
    }

    #[test]
    fn noise_power_and_decorrelation() {
        let zeros = vec![c(0.0, 0.0); 2];
        let reps = add_noise(&zeros, 1.0, 10_000, &RngConfig::new(9, "power")).unwrap();
        let draws: Vec<Complex64> = reps.data.iter().map(|row| row[0]).collect();
        let n = draws.len() as f64;
        let power = draws.iter().map(|d| d.norm_sqr()).sum::<f64>() / n;
        // chi-square with 2e4 degrees of freedom: relative sd about 1%
        assert!((power - 1.0).abs() < 0.05, "power {power}");
        let mr = draws.iter().map(|d| d.re).sum::<f64>() / n;
        let mi = draws.iter().map(|d| d.im).sum::<f64>() / n;
        let cov = draws.iter().map(|d| (d.re - mr) * (d.im - mi)).sum::<f64>() / n;
        let vr = draws.iter().map(|d| (d.re - mr).powi(2)).sum::<f64>() / n;
        let vi = draws.iter().map(|d| (d.im - mi).powi(2)).sum::<f64>() / n;
        let rho = cov / (vr * vi).sqrt();
        assert!(rho.abs() < 0.05, "correlation {rho}");
    }

    #[test]
    fn per_component_convention_doubles_power() {
        let zeros = vec![c(0.0, 0.0)];
        let reps = add_noise_with(
            &zeros,
            1.0,
            10_000,
            &RngConfig::new(9, "power"),
            NoiseConvention::PerComponent,
        )
        .unwrap();
        let power = reps.data.iter().map(|r| r[0].norm_sqr()).sum::<f64>() / 10_000.0;
        assert!((power - 2.0).abs() < 0.1);
    }

    #[test]
    fn noise_is_deterministic() {
        let m = ExponentialModel::reference(74, 1.0).unwrap();
        let s = m.synthesize();
        let a = add_noise(&s, 1.0, 10, &RngConfig::new(5, "x")).unwrap();
        let b = add_noise(&s, 1.0, 10, &RngConfig::new(5, "x")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_file_round_trip() {
        let m = ExponentialModel::reference(10, 0.7).unwrap();
        let reps = add_noise(&m.synthesize(), 0.7, 3, &RngConfig::new(2, "io")).unwrap();
        let mut buf = Vec::new();
        reps.write_text(&mut buf).unwrap();
        let back = ReplicateSet::read_text(&buf[..]).unwrap();
        assert_eq!(back, reps);
    }

    #[test]
    fn mean_signal_is_row_average() {
        let rows = vec![vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(3.0, 0.0), c(0.0, -2.0)]];
        let reps = ReplicateSet::from_rows(rows, 1.0).unwrap();
        assert_eq!(reps.mean_signal, vec![c(2.0, 0.0), c(0.0, 0.0)]);
    }
}
