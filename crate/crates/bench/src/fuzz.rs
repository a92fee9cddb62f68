//! Random input lines against the command parser.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use fedgbp_core::policy::parse_command_bytes;

const TOKENS: &[&str] = &[
    "gbp", "GBP", "member-create", "member-delete", "group-create", "group-delete", "resource-create",
    "resource-delete", "policy-rule-create", "policy-rule-delete", "show", "member", "group", "resource",
    "policy", "--ip", "--pubkey", "--dept", "--timeout", "--actions", "--add:", "--src:", "--dst:", "--src",
    "--dst", "allow", "deny", "1w", "3d", "90s", "0h", "10.0.0.2", "256.1.1.1", "orga.alice", "orgb.db",
    "alice", ".", "..", "-", "--", "=", ":", "é", "\u{0}", "\t", "999999999999999999999w",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FuzzStats {
    pub lines: usize,
    pub intents: usize,
    pub errors: usize,
    pub panics: usize,
}

fn random_bytes(rng: &mut ChaCha20Rng) -> Vec<u8> {
    let len = rng.gen_range(0..96);
    (0..len).map(|_| rng.gen()).collect()
}

/// Command-shaped lines built from real keywords, values and junk, so the
/// parser is exercised past its first token.
fn spliced(rng: &mut ChaCha20Rng) -> Vec<u8> {
    let n = rng.gen_range(0..10);
    let mut line = String::new();
    if rng.gen_bool(0.8) {
        line.push_str("gbp ");
    }
    for _ in 0..n {
        line.push_str(TOKENS.choose(rng).expect("non-empty"));
        if rng.gen_bool(0.85) {
            line.push(' ');
        }
    }
    let mut bytes = line.into_bytes();
    if !bytes.is_empty() && rng.gen_bool(0.2) {
        let i = rng.gen_range(0..bytes.len());
        bytes[i] = rng.gen();
    }
    bytes
}

/// Feed `lines` generated lines to the parser. Every outcome must be an
/// intent or a typed error; panics are caught and counted.
pub fn parser_fuzz(lines: usize, seed: u64) -> FuzzStats {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stats = FuzzStats::default();
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..lines {
        let line = if i % 2 == 0 { random_bytes(&mut rng) } else { spliced(&mut rng) };
        stats.lines += 1;
        match catch_unwind(AssertUnwindSafe(|| parse_command_bytes(&line))) {
            Ok(Ok(_)) => stats.intents += 1,
            Ok(Err(_)) => stats.errors += 1,
            Err(_) => stats.panics += 1,
        }
    }
    std::panic::set_hook(hook);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_clean_and_reproducible() {
        let a = parser_fuzz(2_000, 9);
        assert_eq!(a.panics, 0);
        assert_eq!(a.intents + a.errors, 2_000);
        assert!(a.intents > 0, "spliced lines should sometimes parse");
        assert_eq!(a, parser_fuzz(2_000, 9));
    }
}
