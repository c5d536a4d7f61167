//! Bitstring genotypes decoded through the expression grammar.
//!
//! ```text
//! <expr>    ::= <expr> <op> <expr> | <unit-op> <expr> | <var>
//! <op>      ::= + | - | * | / | ^
//! <unit-op> ::= sin | cos | log | exp | identity
//! <var>     ::= x1 | ... | xk | c1 | ... | cm
//! ```
//!
//! Each expansion of a nonterminal with `n` productions reads the next
//! `ceil(log2 n)` bits as an unsigned integer (MSB first) and picks production
//! `value mod n`. Expansion is leftmost-first and the bitstring never wraps:
//! running out of bits with unresolved nonterminals makes the genome invalid.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{BinaryOp, Expr, UnaryOp};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

const EXPR_RULES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenomeError {
    #[error(
        "could not initialize a valid genome of length {length} for {grammar} \
         after {attempts} attempts (bitstring too short for the grammar?)"
    )]
    InitializationFailure {
        grammar: String,
        length: usize,
        attempts: usize,
    },
    #[error("no valid mutant of a length-{length} genome for {grammar} after {attempts} attempts")]
    MutationFailure {
        grammar: String,
        length: usize,
        attempts: usize,
    },
    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),
    #[error("invalid genome string: {0}")]
    InvalidBits(String),
    #[error("max_attempts must be at least 1")]
    NoAttempts,
    #[error("mutation rate {0} outside [0, 1]")]
    InvalidRate(f64),
}

/// Production sets of the expression grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub variable_count: usize,
    /// Terminal constants available to `<var>`.
    pub constant_pool: Vec<f64>,
    #[serde(default = "all_binary")]
    pub binary_ops: Vec<BinaryOp>,
    #[serde(default = "all_unary")]
    pub unary_ops: Vec<UnaryOp>,
}

fn all_binary() -> Vec<BinaryOp> {
    BinaryOp::ALL.to_vec()
}

fn all_unary() -> Vec<UnaryOp> {
    UnaryOp::ALL.to_vec()
}

impl Grammar {
    /// Full operator sets over `variable_count` variables and `constant_pool`.
    pub fn new(variable_count: usize, constant_pool: Vec<f64>) -> Grammar {
        Grammar {
            variable_count,
            constant_pool,
            binary_ops: all_binary(),
            unary_ops: all_unary(),
        }
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.binary_ops.is_empty() {
            return Err(GenomeError::InvalidGrammar("<op> has no productions".into()));
        }
        if self.unary_ops.is_empty() {
            return Err(GenomeError::InvalidGrammar("<unit-op> has no productions".into()));
        }
        if self.var_rules() == 0 {
            return Err(GenomeError::InvalidGrammar("<var> has no productions".into()));
        }
        if self.constant_pool.iter().any(|c| !c.is_finite()) {
            return Err(GenomeError::InvalidGrammar("non-finite constant".into()));
        }
        Ok(())
    }

    /// The genetic algorithm additionally needs at least one constant.
    pub fn validate_for_search(&self) -> Result<(), GenomeError> {
        self.validate()?;
        if self.constant_pool.is_empty() {
            return Err(GenomeError::InvalidGrammar("empty constant pool".into()));
        }
        Ok(())
    }

    fn var_rules(&self) -> usize {
        self.variable_count + self.constant_pool.len()
    }

    /// Bits consumed per expansion of `<expr>`, `<op>`, `<unit-op>`, `<var>`.
    pub fn codon_widths(&self) -> [usize; 4] {
        [
            codon_width(EXPR_RULES),
            codon_width(self.binary_ops.len()),
            codon_width(self.unary_ops.len()),
            codon_width(self.var_rules()),
        ]
    }

    /// Decodes `genome`; `None` means the bits ran out before every
    /// nonterminal was resolved.
    pub fn decode(&self, genome: &Genome) -> Option<Expr> {
        self.decode_with_usage(genome).map(|(e, _)| e)
    }

    /// Like [`Grammar::decode`], also returning how many bits were consumed.
    pub fn decode_with_usage(&self, genome: &Genome) -> Option<(Expr, usize)> {
        let mut reader = BitReader {
            bits: &genome.bits,
            pos: 0,
            widths: self.codon_widths(),
        };
        let expr = reader.expr(self)?;
        Some((expr, reader.pos))
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grammar(k={}, constants={:?}, {} binary ops, {} unary ops)",
            self.variable_count,
            self.constant_pool,
            self.binary_ops.len(),
            self.unary_ops.len()
        )
    }
}

fn codon_width(productions: usize) -> usize {
    if productions <= 1 {
        0
    } else {
        (usize::BITS - (productions - 1).leading_zeros()) as usize
    }
}

struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
    widths: [usize; 4],
}

impl BitReader<'_> {
    fn read(&mut self, width: usize, productions: usize) -> Option<usize> {
        if self.pos + width > self.bits.len() {
            return None;
        }
        let value = self.bits[self.pos..self.pos + width]
            .iter()
            .fold(0usize, |acc, b| (acc << 1) | usize::from(*b));
        self.pos += width;
        Some(value % productions)
    }

    fn expr(&mut self, g: &Grammar) -> Option<Expr> {
        match self.read(self.widths[0], EXPR_RULES)? {
            0 => {
                let left = self.expr(g)?;
                let op = g.binary_ops[self.read(self.widths[1], g.binary_ops.len())?];
                let right = self.expr(g)?;
                Some(Expr::binary(op, left, right))
            }
            1 => {
                let op = g.unary_ops[self.read(self.widths[2], g.unary_ops.len())?];
                let child = self.expr(g)?;
                Some(Expr::unary(op, child))
            }
            _ => {
                let v = self.read(self.widths[3], g.var_rules())?;
                Some(if v < g.variable_count {
                    Expr::Var(v)
                } else {
                    Expr::Const(g.constant_pool[v - g.variable_count])
                })
            }
        }
    }
}

/// Fixed-length bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    bits: Vec<bool>,
}

impl Genome {
    pub fn from_bits(bits: Vec<bool>) -> Genome {
        Genome { bits }
    }

    pub fn zeros(len: usize) -> Genome {
        Genome {
            bits: vec![false; len],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn complement(&self) -> Genome {
        Genome {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Uniform random bits with P(1) = 0.5.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Genome {
        Genome {
            bits: (0..len).map(|_| rng.gen_bool(0.5)).collect(),
        }
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Genome {
    type Err = GenomeError;

    fn from_str(s: &str) -> Result<Genome, GenomeError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GenomeError::InvalidBits(format!("unexpected '{other}'"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Genome::from_bits)
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Genome, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Draws random genomes until one decodes to a valid expression.
pub fn random_genome<R: Rng + ?Sized>(
    len: usize,
    rng: &mut R,
    grammar: &Grammar,
    max_attempts: usize,
) -> Result<Genome, GenomeError> {
    if max_attempts == 0 {
        return Err(GenomeError::NoAttempts);
    }
    grammar.validate()?;
    for _ in 0..max_attempts {
        let g = Genome::random(len, rng);
        if grammar.decode(&g).is_some() {
            return Ok(g);
        }
    }
    Err(GenomeError::InitializationFailure {
        grammar: grammar.to_string(),
        length: len,
        attempts: max_attempts,
    })
}

/// Flips each bit of `genome` with probability `rate`, retrying from the
/// original until the mutant decodes. The input is left untouched.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rate: f64,
    rng: &mut R,
    grammar: &Grammar,
    max_attempts: usize,
) -> Result<Genome, GenomeError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(GenomeError::InvalidRate(rate));
    }
    if max_attempts == 0 {
        return Err(GenomeError::NoAttempts);
    }
    for _ in 0..max_attempts {
        let bits = genome.bits.iter().map(|b| b ^ rng.gen_bool(rate)).collect();
        let mutant = Genome { bits };
        if grammar.decode(&mutant).is_some() {
            return Ok(mutant);
        }
    }
    Err(GenomeError::MutationFailure {
        grammar: grammar.to_string(),
        length: genome.len(),
        attempts: max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lv_grammar() -> Grammar {
        Grammar::new(2, vec![1.0, 1.5, -3.0, -1.0])
    }

    fn bits(s: &str) -> Genome {
        s.parse().unwrap()
    }

    #[test]
    fn codon_widths() {
        assert_eq!(lv_grammar().codon_widths(), [2, 3, 3, 3]);
        let cp = Grammar::new(4, vec![-1.0, 0.5, 2.0, 6.0, 1.0, 9.81, 19.62]);
        assert_eq!(cp.codon_widths()[3], 4);
        assert_eq!(codon_width(1), 0);
        assert_eq!(codon_width(2), 1);
        assert_eq!(codon_width(8), 3);
        assert_eq!(codon_width(9), 4);
    }

    #[test]
    fn all_zero_genome_never_terminates() {
        assert_eq!(lv_grammar().decode(&Genome::zeros(20)), None);
    }

    #[test]
    fn variable_rule_then_variable_zero() {
        // <expr> codon 10 -> rule 2 (<var>), <var> codon 000 -> x1, rest ignored
        let g = bits("10000" .to_string().as_str()).bits().to_vec();
        let mut padded = g.clone();
        padded.extend(std::iter::repeat(true).take(15));
        let (e, used) = lv_grammar().decode_with_usage(&Genome::from_bits(padded)).unwrap();
        assert_eq!(e, Expr::Var(0));
        assert_eq!(used, 5);
    }

    #[test]
    fn hand_traced_pendulum_expression() {
        let grammar = Grammar::new(2, vec![-9.81, -0.1, -1.0, 1.0]);
        // <expr>=00 (binary): <expr>=10 <var>=010 (-9.81); <op>=010 (*);
        // <expr>=01 (unary): <unit-op>=000 (sin); <expr>=10 <var>=000 (x1)
        let g = bits("00100100100100010000");
        assert_eq!(g.len(), 20);
        let e = grammar.decode(&g).unwrap();
        assert_eq!(
            e,
            Expr::mul(Expr::Const(-9.81), Expr::unary(UnaryOp::Sin, Expr::Var(0)))
        );
        // one bit short
        assert_eq!(grammar.decode(&bits("0010010010010001000")), None);
    }

    #[test]
    fn decode_is_deterministic() {
        let g = bits("10011011000110101110");
        assert_eq!(lv_grammar().decode(&g), lv_grammar().decode(&g));
    }

    #[test]
    fn random_genome_is_valid_and_seeded() {
        let grammar = lv_grammar();
        let a = random_genome(20, &mut ChaCha8Rng::seed_from_u64(42), &grammar, 10_000).unwrap();
        let b = random_genome(20, &mut ChaCha8Rng::seed_from_u64(42), &grammar, 10_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(grammar.decode(&a).is_some());
    }

    #[test]
    fn one_bit_cannot_resolve_the_grammar() {
        let err = random_genome(1, &mut ChaCha8Rng::seed_from_u64(0), &lv_grammar(), 10_000)
            .unwrap_err();
        match err {
            GenomeError::InitializationFailure { length, attempts, .. } => {
                assert_eq!(length, 1);
                assert_eq!(attempts, 10_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let grammar = lv_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_genome(20, &mut rng, &grammar, 10_000).unwrap();
        assert_eq!(mutate(&g, 0.0, &mut rng, &grammar, 10).unwrap(), g);
    }

    #[test]
    fn full_rate_mutation_is_complement() {
        let grammar = lv_grammar();
        // 10000 + ones: complement is 01111 + zeros... find a genome whose complement is valid
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = loop {
            let g = random_genome(20, &mut rng, &grammar, 10_000).unwrap();
            if grammar.decode(&g.complement()).is_some() {
                break g;
            }
        };
        let m = mutate(&g, 1.0, &mut rng, &grammar, 10).unwrap();
        assert_eq!(m, g.complement());
    }

    #[test]
    fn mutation_fixture_under_fixed_seed() {
        let grammar = lv_grammar();
        let g = bits("10011011000110101110");
        assert!(grammar.decode(&g).is_some());
        let a = mutate(&g, 0.1, &mut ChaCha8Rng::seed_from_u64(5), &grammar, 10_000).unwrap();
        let b = mutate(&g, 0.1, &mut ChaCha8Rng::seed_from_u64(5), &grammar, 10_000).unwrap();
        assert_eq!(a, b);
        assert!(grammar.decode(&a).is_some());
        assert_eq!(g.to_string(), "10011011000110101110");
    }

    #[test]
    fn invalid_arguments() {
        let grammar = lv_grammar();
        let g = Genome::zeros(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            mutate(&g, 1.5, &mut rng, &grammar, 1),
            Err(GenomeError::InvalidRate(1.5))
        );
        assert_eq!(random_genome(4, &mut rng, &grammar, 0), Err(GenomeError::NoAttempts));
        assert!("01x".parse::<Genome>().is_err());
        assert!(Grammar::new(0, vec![]).validate().is_err());
        assert!(Grammar::new(2, vec![]).validate_for_search().is_err());
    }

    #[test]
    fn valid_fraction_is_positive() {
        let grammar = lv_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let valid = (0..10_000)
            .filter(|_| grammar.decode(&Genome::random(20, &mut rng)).is_some())
            .count();
        assert!(valid > 0);
    }

    #[test]
    fn genome_string_round_trip() {
        let g = bits("0110");
        assert_eq!(serde_json::to_string(&g).unwrap(), "\"0110\"");
        let back: Genome = serde_json::from_str("\"0110\"").unwrap();
        assert_eq!(back, g);
    }

    fn collect_leaves(e: &Expr, vars: &mut Vec<usize>, consts: &mut Vec<f64>) {
        match e {
            Expr::Var(i) => vars.push(*i),
            Expr::Const(c) => consts.push(*c),
            Expr::Time => panic!("grammar has no time terminal"),
            Expr::Unary(_, c) => collect_leaves(c, vars, consts),
            Expr::Binary(_, l, r) => {
                collect_leaves(l, vars, consts);
                collect_leaves(r, vars, consts);
            }
        }
    }

    proptest! {
        #[test]
        fn prefix_determines_decoding(
            raw in prop::collection::vec(any::<bool>(), 20),
            tail in prop::collection::vec(any::<bool>(), 40),
        ) {
            let grammar = lv_grammar();
            let g = Genome::from_bits(raw.clone());
            if let Some((e, used)) = grammar.decode_with_usage(&g) {
                let mut other = raw[..used].to_vec();
                other.extend(&tail);
                prop_assert_eq!(grammar.decode(&Genome::from_bits(other)), Some(e));
            }
        }

        #[test]
        fn decoded_terminals_come_from_grammar(raw in prop::collection::vec(any::<bool>(), 60)) {
            let grammar = Grammar {
                variable_count: 3,
                constant_pool: vec![2.0, -1.0],
                binary_ops: vec![BinaryOp::Add, BinaryOp::Mul],
                unary_ops: vec![UnaryOp::Cos],
            };
            if let Some(e) = grammar.decode(&Genome::from_bits(raw)) {
                let (mut vars, mut consts) = (vec![], vec![]);
                collect_leaves(&e, &mut vars, &mut consts);
                prop_assert!(vars.iter().all(|v| *v < 3));
                prop_assert!(consts.iter().all(|c| grammar.constant_pool.contains(c)));
                let mut stack = vec![&e];
                while let Some(node) = stack.pop() {
                    match node {
                        Expr::Unary(op, c) => { prop_assert_eq!(*op, UnaryOp::Cos); stack.push(c); }
                        Expr::Binary(op, l, r) => {
                            prop_assert!(grammar.binary_ops.contains(op));
                            stack.push(l); stack.push(r);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
}
