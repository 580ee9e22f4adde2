use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Pocock-Simon: category-count imbalance.
    Ps,
    /// Nishi-Takaichi: group means and SDs against the grand mean and SD.
    Nt,
    /// Ma-Hu: kernel density estimates of each covariate.
    Mh,
    /// Bertsimas-Korolko-Weinstein robust mean/variance imbalance.
    Bkw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ps, Method::Nt, Method::Mh, Method::Bkw];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Ps => "ps",
            Method::Nt => "nt",
            Method::Mh => "mh",
            Method::Bkw => "bkw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ps" => Ok(Method::Ps),
            "nt" => Ok(Method::Nt),
            "mh" => Ok(Method::Mh),
            "bkw" => Ok(Method::Bkw),
            other => Err(Error::config("method", format!("unknown method {other:?}"))),
        }
    }
}

/// Closed interval `[lo, hi]` from which the uncertainty parameter is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRange {
    pub lo: f64,
    pub hi: f64,
}

impl GammaRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn fixed(gamma: f64) -> Self {
        Self { lo: gamma, hi: gamma }
    }

    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.lo && gamma <= self.hi
    }
}

impl Default for GammaRange {
    fn default() -> Self {
        Self { lo: 0.5, hi: 4.0 }
    }
}

impl FromStr for GammaRange {
    type Err = Error;

    /// Accepts `lo:hi` or a single value for a fixed gamma.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("gamma", format!("not a number: {v:?}")))
        };
        match s.split_once(':') {
            Some((lo, hi)) => Ok(Self::new(parse(lo)?, parse(hi)?)),
            None => Ok(Self::fixed(parse(s)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub method: Method,
    /// Biased-coin probability of following the preferred group. BKW always uses 1.
    pub p0: f64,
    /// Number of quantile categories (PS only).
    pub categories: usize,
    /// Weight of the SD term in the BKW discrepancy.
    pub rho: f64,
    pub gamma_range: GammaRange,
    /// Size of the permuted-block initial cohort.
    pub n0: usize,
    pub block_size: usize,
    pub target_n: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::Ps,
            p0: 0.8,
            categories: 3,
            rho: 6.0,
            gamma_range: GammaRange::default(),
            n0: 8,
            block_size: 4,
            target_n: 18,
        }
    }
}

impl MethodConfig {
    pub fn new(method: Method, target_n: usize) -> Self {
        Self {
            method,
            target_n,
            ..Self::default()
        }
    }

    /// Coin probability actually used in the adaptive phase.
    pub fn effective_p0(&self) -> f64 {
        match self.method {
            Method::Bkw => 1.0,
            _ => self.p0,
        }
    }

    /// Set one parameter from its textual `key=value` form.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |field: &str| {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(field, format!("not a number: {value:?}")))
        };
        let int = |field: &str| {
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::config(field, format!("not a non-negative integer: {value:?}")))
        };
        match key.trim().to_ascii_lowercase().as_str() {
            "p0" => self.p0 = num("p0")?,
            "c" | "categories" => self.categories = int("categories")?,
            "rho" => self.rho = num("rho")?,
            "gamma" | "gamma_range" => self.gamma_range = value.parse()?,
            "n0" => self.n0 = int("n0")?,
            "block_size" | "block" => self.block_size = int("block_size")?,
            "n" | "target_n" => self.target_n = int("target_n")?,
            other => return Err(Error::config(other, "unknown parameter")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// Validation for a one-shot run, where `n0 == target_n` (a pure
    /// permuted-block trial) is allowed.
    pub(crate) fn validate_for_run(&self) -> Result<()> {
        self.check(true)
    }

    fn check(&self, allow_block_only: bool) -> Result<()> {
        if !(0.5..=1.0).contains(&self.p0) {
            return Err(Error::config("p0", format!("must lie in [0.5, 1], got {}", self.p0)));
        }
        if self.method == Method::Ps && self.categories < 2 {
            return Err(Error::BadCategoryCount(self.categories));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::config(
                "rho",
                format!("must be a finite value >= 0, got {}", self.rho),
            ));
        }
        let g = self.gamma_range;
        if !(g.lo > 0.0 && g.lo <= g.hi && g.hi.is_finite()) {
            return Err(Error::config(
                "gamma_range",
                format!("must be a nonempty interval within (0, inf), got [{}, {}]", g.lo, g.hi),
            ));
        }
        if self.target_n == 0 {
            return Err(Error::config("target_n", "must be at least 1"));
        }
        if self.n0 > self.target_n || (self.n0 == self.target_n && !allow_block_only) {
            return Err(Error::config(
                "n0",
                format!(
                    "initial cohort {} must be smaller than target_n {}",
                    self.n0, self.target_n
                ),
            ));
        }
        if self.block_size == 0 || self.block_size % 2 != 0 {
            return Err(Error::config(
                "block_size",
                format!("must be a positive even number, got {}", self.block_size),
            ));
        }
        if self.n0 % self.block_size != 0 {
            return Err(Error::config(
                "n0",
                format!("{} is not divisible by block_size {}", self.n0, self.block_size),
            ));
        }
        // NT needs an allocated subject and MH a subject in each group before
        // the first adaptive step; a balanced block cohort provides both.
        if matches!(self.method, Method::Nt | Method::Mh) && self.n0 == 0 {
            return Err(Error::config(
                "n0",
                format!("{} needs an initial block cohort, got n0 = 0", self.method),
            ));
        }
        if self.method == Method::Bkw && self.target_n % 2 != 0 {
            return Err(Error::OddTargetN(self.target_n));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for m in Method::ALL {
            MethodConfig::new(m, 18).validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let mut c = MethodConfig::new(Method::Nt, 8);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig { ref field, .. }) if field == "n0"));
        c.target_n = 18;
        c.block_size = 3;
        assert!(c.validate().is_err());
        c.block_size = 4;
        c.p0 = 0.3;
        assert!(c.validate().is_err());
        let c = MethodConfig::new(Method::Bkw, 21);
        assert_eq!(c.validate(), Err(Error::OddTargetN(21)));
    }

    #[test]
    fn params_parse() {
        let mut c = MethodConfig::default();
        c.set_param("p0", "0.9").unwrap();
        c.set_param("gamma", "1:2").unwrap();
        c.set_param("c", "4").unwrap();
        assert_eq!(c.p0, 0.9);
        assert_eq!(c.gamma_range, GammaRange::new(1.0, 2.0));
        assert_eq!(c.categories, 4);
        assert!(c.set_param("nope", "1").is_err());
        assert_eq!("BKW".parse::<Method>().unwrap(), Method::Bkw);
    }

    #[test]
    fn bkw_ignores_p0() {
        let mut c = MethodConfig::new(Method::Bkw, 18);
        c.p0 = 0.6;
        assert_eq!(c.effective_p0(), 1.0);
    }
}
