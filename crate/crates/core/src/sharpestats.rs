//! Sharpe-ratio uncertainty under the iid approximation
//! `SE(SR) ~= sqrt((K + SR^2 / 2) / T)`, two-sided normal confidence
//! intervals, the zero-coverage boundary and a t-statistic hurdle.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

/// Multiple-testing hurdle on the Sharpe t-statistic.
pub const T_HURDLE: f64 = 3.0;

/// Name of the inverse-normal routine, echoed into reports.
pub const QUANTILE_METHOD: &str =
    "Wichura AS241 (PPND16), rational approximation, |rel err| < 1e-15";

/// Sharpe convention constant: K = 1 for per-period Sharpe, K = 252 for
/// Sharpe annualized from daily returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SharpeConvention {
    Period,
    Annualized,
}

impl SharpeConvention {
    pub fn k(self) -> f64 {
        match self {
            SharpeConvention::Period => 1.0,
            SharpeConvention::Annualized => 252.0,
        }
    }

    /// Multiplier applied to a per-period Sharpe.
    pub fn annualization(self) -> f64 {
        self.k().sqrt()
    }
}

impl TryFrom<u32> for SharpeConvention {
    type Error = Error;

    fn try_from(k: u32) -> Result<Self> {
        match k {
            1 => Ok(SharpeConvention::Period),
            252 => Ok(SharpeConvention::Annualized),
            other => Err(Error::validation(
                "sharpe convention",
                format!("K must be 1 or 252, got {other}"),
            )),
        }
    }
}

impl From<SharpeConvention> for u32 {
    fn from(c: SharpeConvention) -> u32 {
        c.k() as u32
    }
}

impl fmt::Display for SharpeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SharpeConvention::Period => f.write_str("K=1 (period)"),
            SharpeConvention::Annualized => f.write_str("K=252 (annualized from daily)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeQuery {
    pub sr_hat: f64,
    pub observations: usize,
    pub convention: SharpeConvention,
    pub level: f64,
}

impl SharpeQuery {
    pub fn new(sr_hat: f64, observations: usize, convention: SharpeConvention) -> Self {
        Self {
            sr_hat,
            observations,
            convention,
            level: 0.95,
        }
    }

    pub fn with_level(self, level: f64) -> Self {
        Self { level, ..self }
    }

    fn validate(&self) -> Result<()> {
        check_t(self.observations)?;
        check_level(self.level)?;
        if !self.sr_hat.is_finite() {
            return Err(Error::validation("sharpe query", "sr_hat must be finite"));
        }
        Ok(())
    }
}

fn check_t(t: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::validation(
            "sharpe query",
            format!("T must be >= 2, got {t}"),
        ));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(
            "sharpe query",
            format!("level must be in (0, 1), got {level}"),
        ));
    }
    Ok(())
}

/// Inverse standard normal CDF.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_13) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r)
            + 3.387_132_872_796_366_5;
        let den = (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r)
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r)
            + 1.423_437_110_749_683_5;
        let den = (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r)
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r)
            + 6.657_904_643_501_103;
        let den = (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r)
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Two-sided critical value for a confidence level.
pub fn two_sided_z(level: f64) -> f64 {
    normal_quantile(1.0 - (1.0 - level) / 2.0)
}

pub fn lo_se(q: &SharpeQuery) -> Result<f64> {
    q.validate()?;
    Ok(((q.convention.k() + q.sr_hat * q.sr_hat / 2.0) / q.observations as f64).sqrt())
}

pub fn ci_half_width(q: &SharpeQuery) -> Result<f64> {
    Ok(two_sided_z(q.level) * lo_se(q)?)
}

/// Smallest `sr >= 0` whose confidence interval just excludes zero, the
/// nonnegative root of `sr = z sqrt((K + sr^2/2) / T)`, i.e.
/// `sr^2 = z^2 K / (T - z^2 / 2)`.
pub fn zero_coverage_boundary(
    observations: usize,
    convention: SharpeConvention,
    level: f64,
) -> Result<f64> {
    check_t(observations)?;
    check_level(level)?;
    let z2 = two_sided_z(level).powi(2);
    let t = observations as f64;
    if z2 >= 2.0 * t {
        return Err(Error::Undefined(format!(
            "no zero-coverage boundary: z^2 = {z2:.4} >= 2T = {}",
            2.0 * t
        )));
    }
    Ok((z2 * convention.k() / (t - z2 / 2.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hurdle {
    pub t_stat: f64,
    pub passes: bool,
}

/// Period-convention t-statistic `SR sqrt(T) / sqrt(1 + SR^2 / 2)` against
/// [`T_HURDLE`].
pub fn t_hurdle(sr_hat: f64, observations: usize) -> Result<Hurdle> {
    check_t(observations)?;
    let t_stat = sr_hat * (observations as f64).sqrt() / (1.0 + sr_hat * sr_hat / 2.0).sqrt();
    Ok(Hurdle {
        t_stat,
        passes: t_stat >= T_HURDLE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub sr: f64,
    #[serde(rename = "T")]
    pub observations: usize,
    pub half_width: f64,
}

/// Half-widths over `srs x observations`, row-major in `srs`.
pub fn half_width_grid(
    srs: &[f64],
    observations: &[usize],
    convention: SharpeConvention,
    level: f64,
    exec: Exec,
) -> Result<Vec<GridPoint>> {
    check_level(level)?;
    for &t in observations {
        check_t(t)?;
    }
    let z = two_sided_z(level);
    let rows = exec.map(srs, |&sr| {
        observations
            .iter()
            .map(|&t| GridPoint {
                sr,
                observations: t,
                half_width: z * ((convention.k() + sr * sr / 2.0) / t as f64).sqrt(),
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// `sr in [0, 8]` step 0.1 by `T in [20, 500]` step 10.
pub fn default_grid_axes() -> (Vec<f64>, Vec<usize>) {
    let srs = (0..=80).map(|i| i as f64 / 10.0).collect();
    let ts = (2..=50).map(|i| i * 10).collect();
    (srs, ts)
}

pub fn write_grid_csv<W: Write>(points: &[GridPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::validation("grid csv", e.to_string());
    w.write_record(["sr", "T", "half_width"]).map_err(err)?;
    for p in points {
        w.write_record([
            p.sr.to_string(),
            p.observations.to_string(),
            p.half_width.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<grid csv>".into(),
        source,
    })
}
