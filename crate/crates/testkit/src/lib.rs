//! Test-only support: random toy grammars, reference oracles written
//! independently of the library's algorithms, and a mock scoring server.

pub mod earley;
pub mod enumerate;
pub mod mock;
pub mod toy;

use paradecode::align::AlignmentModel;
use rand::Rng;

/// Parallel pairs where each `x<k>` prefers `c<k>`, with substitution
/// noise, an occasional extra word and an occasional swap.
pub fn synthetic_pairs<R: Rng>(rng: &mut R, n: usize) -> Vec<(Vec<String>, Vec<String>)> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..7);
            let x: Vec<String> = (0..len).map(|_| format!("x{}", rng.gen_range(0..10))).collect();
            let mut c: Vec<String> = x
                .iter()
                .map(|w| if rng.gen_bool(0.8) { w.replace('x', "c") } else { format!("c{}", rng.gen_range(0..12)) })
                .collect();
            if rng.gen_bool(0.3) {
                c.push("the".into());
            }
            if rng.gen_bool(0.3) {
                c.swap(0, len - 1);
            }
            (x, c)
        })
        .collect()
}

/// Association score evaluated as a direct product of sums, straight from
/// the formula, using only the model's probability lookups.
pub fn association_direct(m: &AlignmentModel, x: &[String], c: &[String]) -> f64 {
    let mut fwd = 1.0;
    for i in 1..=c.len() {
        let mut s = 0.0;
        for j in 0..=x.len() {
            let src = if j == 0 { None } else { Some(x[j - 1].as_str()) };
            s += m.fwd.lex_prob(src, &c[i - 1]) * m.fwd.pos_prob(j, i, x.len(), c.len());
        }
        fwd *= s;
    }
    let mut rev = 1.0;
    for j in 1..=x.len() {
        let mut s = 0.0;
        for i in 0..=c.len() {
            let src = if i == 0 { None } else { Some(c[i - 1].as_str()) };
            s += m.rev.lex_prob(src, &x[j - 1]) * m.rev.pos_prob(i, j, c.len(), x.len());
        }
        rev *= s;
    }
    fwd.ln() + rev.ln()
}
