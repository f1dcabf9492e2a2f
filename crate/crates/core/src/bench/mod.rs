//! The benchmark programs with seeded query generators and result oracles.
//!
//! Oracles never run rules; each recomputes the expected result directly
//! (sieve, Euclid, Floyd–Warshall, truth tables, disjoint sets) and compares
//! it with the final store.

mod generate;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::engine::DEFAULT_MAX_STEPS;
use crate::program::{parse_program, Goal, Program};
use crate::term::Term;

pub use generate::GeneratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    Min,
    Primes,
    Gcd,
    Gcd2,
    Fib,
    Msort,
    Floyd,
    Sat,
    Blocks,
    Uf,
}

/// Static description of a benchmark.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub program_source: &'static str,
    /// Accepted variants; the first is the default. Empty when the
    /// benchmark has none.
    pub variants: &'static [&'static str],
    /// Smallest accepted size.
    pub min_size: usize,
}

impl Benchmark {
    pub const ALL: [Benchmark; 10] = [
        Benchmark::Min,
        Benchmark::Primes,
        Benchmark::Gcd,
        Benchmark::Gcd2,
        Benchmark::Fib,
        Benchmark::Msort,
        Benchmark::Floyd,
        Benchmark::Sat,
        Benchmark::Blocks,
        Benchmark::Uf,
    ];

    pub fn spec(self) -> BenchmarkSpec {
        let (name, program_source, variants, min_size): (_, _, &'static [&'static str], _) =
            match self {
                Benchmark::Min => ("min", include_str!("../../programs/min.chr"), &[], 1),
                Benchmark::Primes => ("primes", include_str!("../../programs/primes.chr"), &[], 2),
                Benchmark::Gcd => ("gcd", include_str!("../../programs/gcd.chr"), &[], 2),
                Benchmark::Gcd2 => ("gcd2", include_str!("../../programs/gcd.chr"), &[], 2),
                Benchmark::Fib => ("fib", include_str!("../../programs/fib.chr"), &[], 0),
                Benchmark::Msort => ("msort", include_str!("../../programs/msort.chr"), &[], 2),
                Benchmark::Floyd => {
                    ("floyd", include_str!("../../programs/floyd.chr"), &["2", "3"], 2)
                }
                Benchmark::Sat => ("sat", include_str!("../../programs/sat.chr"), &[], 1),
                Benchmark::Blocks => {
                    ("blocks", include_str!("../../programs/blocks.chr"), &["1", "2"], 1)
                }
                Benchmark::Uf => {
                    ("uf", include_str!("../../programs/uf.chr"), &["dense", "matching"], 1)
                }
            };
        BenchmarkSpec {
            name,
            program_source,
            variants,
            min_size,
        }
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    /// Step limit used when none is given. gcd2 needs millions of steps
    /// for the sequential strategies at n = 30.
    pub fn default_max_steps(self) -> usize {
        match self {
            Benchmark::Gcd2 => 20_000_000,
            _ => DEFAULT_MAX_STEPS,
        }
    }

    pub fn program(self) -> Program {
        parse_program(self.spec().program_source).expect("bundled programs are valid")
    }

    /// Resolves an optional variant to the benchmark's canonical variant.
    pub fn variant(self, requested: Option<&str>) -> Result<Option<&'static str>, GeneratorError> {
        let variants = self.spec().variants;
        match (requested, variants.first()) {
            (None, default) => Ok(default.copied()),
            (Some(v), _) => variants
                .iter()
                .find(|&&known| known == v)
                .map(|&known| Some(known))
                .ok_or_else(|| GeneratorError::UnknownVariant {
                    benchmark: self.name(),
                    variant: v.to_string(),
                }),
        }
    }

    /// Builds the query for size `n`. Deterministic in `(n, variant, seed)`.
    pub fn generate(self, n: usize, variant: Option<&str>, seed: u64) -> Result<Goal, GeneratorError> {
        let variant = self.variant(variant)?;
        if n < self.spec().min_size {
            return Err(GeneratorError::SizeTooSmall {
                benchmark: self.name(),
                n,
                min: self.spec().min_size,
            });
        }
        let terms = match self {
            Benchmark::Min => generate::min(n),
            Benchmark::Primes => generate::primes(n),
            Benchmark::Gcd => generate::gcd(n),
            Benchmark::Gcd2 => generate::gcd2(n),
            Benchmark::Fib => generate::fib(n),
            Benchmark::Msort => generate::msort(n),
            Benchmark::Floyd => generate::floyd(n, factor(variant), seed)?,
            Benchmark::Sat => generate::sat(n, seed),
            Benchmark::Blocks => generate::blocks(n, factor(variant), seed),
            Benchmark::Uf => generate::uf(n, variant == Some("matching"), seed),
        };
        Ok(Goal::new(terms).expect("generated goals are ground constraints"))
    }

    /// Checks a final store against the expected result for `goal`.
    pub fn oracle(self, goal: &Goal, final_store: &[Term]) -> Result<(), String> {
        let g = &goal.constraints;
        match self {
            Benchmark::Min => oracle::min(g, final_store),
            Benchmark::Primes => oracle::primes(g, final_store),
            Benchmark::Gcd | Benchmark::Gcd2 => oracle::gcd(g, final_store),
            Benchmark::Fib => oracle::fib(g, final_store),
            Benchmark::Msort => oracle::msort(g, final_store),
            Benchmark::Floyd => oracle::floyd(g, final_store),
            Benchmark::Sat => oracle::sat(g, final_store),
            Benchmark::Blocks => oracle::blocks(g, final_store),
            Benchmark::Uf => oracle::uf(g, final_store),
        }
    }
}

fn factor(variant: Option<&str>) -> usize {
    variant.and_then(|v| v.parse().ok()).unwrap_or(1)
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Benchmark::ALL.iter().map(|b| b.name()).collect();
                format!("unknown example `{s}` (known: {})", names.join(", "))
            })
    }
}

/// A generated benchmark query together with its parsed program.
#[derive(Debug, Clone)]
pub struct Instance {
    pub benchmark: Benchmark,
    pub variant: Option<&'static str>,
    pub n: usize,
    pub seed: u64,
    pub program: Arc<Program>,
    pub goal: Goal,
}

impl Instance {
    pub fn new(benchmark: Benchmark, variant: Option<&str>, n: usize, seed: u64) -> Result<Self, GeneratorError> {
        Ok(Instance {
            benchmark,
            variant: benchmark.variant(variant)?,
            n,
            seed,
            program: Arc::new(benchmark.program()),
            goal: benchmark.generate(n, variant, seed)?,
        })
    }

    pub fn oracle(&self, final_store: &[Term]) -> Result<(), String> {
        self.benchmark.oracle(&self.goal, final_store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_programs_parse() {
        for b in Benchmark::ALL {
            let p = b.program();
            assert!(!p.rules().is_empty(), "{b}");
        }
        assert_eq!(Benchmark::Uf.program().rules().len(), 6);
        assert!(Benchmark::Uf.program().rule("foundUpdate").is_some());
        assert_eq!(Benchmark::Sat.program().rules().len(), 6);
    }

    #[test]
    fn names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>(), Ok(b));
        }
        assert!("nope".parse::<Benchmark>().is_err());
    }

    #[test]
    fn variants_resolve() {
        assert_eq!(Benchmark::Floyd.variant(None).unwrap(), Some("2"));
        assert_eq!(Benchmark::Uf.variant(Some("matching")).unwrap(), Some("matching"));
        assert_eq!(Benchmark::Min.variant(None).unwrap(), None);
        assert!(Benchmark::Min.variant(Some("x")).is_err());
        assert!(Benchmark::Blocks.variant(Some("3")).is_err());
    }

    #[test]
    fn sizes_are_checked() {
        assert!(Benchmark::Primes.generate(1, None, 0).is_err());
        assert!(Benchmark::Fib.generate(0, None, 0).is_ok());
    }
}
