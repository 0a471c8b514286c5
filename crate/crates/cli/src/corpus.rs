//! The bundled example corpus.

use rayon::prelude::*;

use sigmared::error::Result;

use crate::pipeline::{run_problem, Options};
use crate::problem::Problem;
use crate::report::Report;

pub const FILES: [(&str, &str); 9] = [
    ("example1", include_str!("../corpus/example1.prob")),
    ("example2", include_str!("../corpus/example2.prob")),
    ("example3", include_str!("../corpus/example3.prob")),
    ("example4", include_str!("../corpus/example4.prob")),
    ("example5", include_str!("../corpus/example5.prob")),
    ("example6", include_str!("../corpus/example6.prob")),
    ("example7", include_str!("../corpus/example7.prob")),
    ("example8", include_str!("../corpus/example8.prob")),
    ("example9", include_str!("../corpus/example9.prob")),
];

/// Every corpus problem, variants included, in file order.
pub fn problems() -> Result<Vec<Problem>> {
    let mut out = Vec::new();
    for (name, text) in FILES {
        out.extend(Problem::parse_all(name, text)?);
    }
    Ok(out)
}

pub fn run_all(problems: &[Problem], opts: &Options) -> Vec<Report> {
    problems.par_iter().map(|p| run_problem(p, opts)).collect()
}

pub fn run_corpus(opts: &Options) -> Result<Vec<Report>> {
    Ok(run_all(&problems()?, opts))
}
