use std::fmt;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;

/// Where seeds come from for trials created without an explicit one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// A fresh OS-entropy seed per trial.
    #[default]
    Random,
    /// The same seed for every trial; for demos and reproducible test runs.
    Fixed(u64),
}

impl SeedPolicy {
    pub fn next_seed(&self) -> u64 {
        match self {
            SeedPolicy::Random => rand::random(),
            SeedPolicy::Fixed(s) => *s,
        }
    }
}

impl FromStr for SeedPolicy {
    type Err = String;

    /// `random`, `fixed:<u64>` or a bare `<u64>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("random") {
            return Ok(SeedPolicy::Random);
        }
        let digits = s.strip_prefix("fixed:").unwrap_or(s);
        digits
            .parse()
            .map(SeedPolicy::Fixed)
            .map_err(|_| format!("expected `random` or `fixed:<integer>`, got {s:?}"))
    }
}

impl fmt::Display for SeedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedPolicy::Random => f.write_str("random"),
            SeedPolicy::Fixed(s) => write!(f, "fixed:{s}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub seed_policy: SeedPolicy,
    /// Static files served for any path the API does not claim.
    pub console_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8077)),
            data_dir: PathBuf::from("covbal-data"),
            seed_policy: SeedPolicy::Random,
            console_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_policy_parses() {
        assert_eq!("random".parse::<SeedPolicy>().unwrap(), SeedPolicy::Random);
        assert_eq!("fixed:17".parse::<SeedPolicy>().unwrap(), SeedPolicy::Fixed(17));
        assert_eq!("17".parse::<SeedPolicy>().unwrap(), SeedPolicy::Fixed(17));
        assert!("fixed:x".parse::<SeedPolicy>().is_err());
        assert_eq!(SeedPolicy::Fixed(3).to_string(), "fixed:3");
    }
}
