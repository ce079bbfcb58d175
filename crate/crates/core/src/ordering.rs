//! Per-step subflow orderings.
//!
//! Each time step draws one block of `p - 1` numbers in `[0, 1)` from a
//! driver and applies a single descending Fisher–Yates pass to the
//! reference ordering `(1, ..., p)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::lowdisc::RadicalInverseSequence;
use crate::{Error, Result};

/// Stream label for randomized ordering drivers. Problem generation uses a
/// different label so the two never share ChaCha keystream.
pub(crate) const ORDERING_STREAM: u64 = 1 << 32;

/// A permutation `(π_1, ..., π_p)` of `{1, ..., p}`, stored 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let p = image.len();
        let mut seen = vec![false; p + 1];
        for &v in &image {
            if v == 0 || v > p || seen[v] {
                return Err(Error::domain(format!("{image:?} is not a permutation of 1..={p}")));
            }
            seen[v] = true;
        }
        Ok(Self(image))
    }

    pub fn identity(p: usize) -> Self {
        Self((1..=p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// The same permutation as 0-based flow indices, in application order.
    pub fn flow_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|v| v - 1)
    }
}

/// One descending Fisher–Yates pass over a copy of `reference`.
///
/// For `i = p` down to `2` the next `q` picks `j = min(⌊q·i⌋ + 1, i)` and
/// swaps positions `i` and `j` (both 1-based). With `p = 2` this means
/// `q >= 1/2` leaves the identity in place.
pub fn fisher_yates(reference: &Permutation, block: &[f64]) -> Result<Permutation> {
    let p = reference.len();
    if block.len() + 1 != p {
        return Err(Error::DimensionMismatch { expected: p.saturating_sub(1), found: block.len() });
    }
    let mut a = reference.0.clone();
    for (&q, i) in block.iter().zip((2..=p).rev()) {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::domain(format!("shuffle input {q} outside [0, 1)")));
        }
        let j = ((q * i as f64).floor() as usize + 1).min(i);
        a.swap(i - 1, j - 1);
    }
    Ok(Permutation(a))
}

/// Sign of a two-operator ordering: `+1` for `(1, 2)` (i.e. `S_2 S_1`),
/// `-1` for `(2, 1)`.
pub fn two_operator_sign(perm: &Permutation) -> Result<i8> {
    if perm.len() != 2 {
        return Err(Error::domain(format!("two-operator sign needs p = 2, got p = {}", perm.len())));
    }
    Ok(if perm.is_identity() { 1 } else { -1 })
}

/// Source of shuffle inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Driver {
    /// `q_k = φ_R(offset + k)`.
    RadicalInverse { base: u32, offset: u64 },
    /// ChaCha20 keyed by `seed`, on stream `run` of the ordering domain.
    Seeded { seed: u64, run: u64 },
}

#[derive(Debug, Clone)]
enum Source {
    Sequence(RadicalInverseSequence),
    Prng(Box<ChaCha20Rng>),
}

impl Source {
    fn next(&mut self) -> f64 {
        match self {
            Source::Sequence(seq) => seq.next().expect("radical-inverse sequence is infinite"),
            Source::Prng(rng) => rng.random::<f64>(),
        }
    }
}

/// Stream of per-step permutations `σ^0, σ^1, ...`.
#[derive(Debug, Clone)]
pub struct OrderingStream {
    source: Source,
    reference: Permutation,
    step: u64,
    block: Vec<f64>,
}

impl OrderingStream {
    pub fn new(driver: &Driver, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::domain(format!("ordering stream needs p >= 2, got {p}")));
        }
        let source = match *driver {
            Driver::RadicalInverse { base, offset } => {
                Source::Sequence(RadicalInverseSequence::with_offset(base, offset)?)
            }
            Driver::Seeded { seed, run } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream(ORDERING_STREAM | run);
                Source::Prng(Box::new(rng))
            }
        };
        Ok(Self { source, reference: Permutation::identity(p), step: 0, block: vec![0.0; p - 1] })
    }

    pub fn p(&self) -> usize {
        self.reference.len()
    }

    /// Number of permutations emitted so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn next_permutation(&mut self) -> Permutation {
        for q in self.block.iter_mut() {
            *q = self.source.next();
        }
        self.step += 1;
        fisher_yates(&self.reference, &self.block).expect("driver emits blocks in [0, 1) of length p - 1")
    }
}

impl Iterator for OrderingStream {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        Some(self.next_permutation())
    }
}
