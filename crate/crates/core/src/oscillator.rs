//! Closed-loop oscillator: the network's output feeds back as its next input.
//!
//! A multiplexer picks the external seed on the first iteration and the
//! previous output afterwards. All values are in normalized coordinates.

use thiserror::Error;

use crate::ann::AnnModel;

#[derive(Debug, Error, PartialEq)]
pub enum OscillatorError {
    #[error("oscillator requires a square model, got {0}")]
    NotSquare(String),
    #[error("seed has {got} values, model expects {expected}")]
    SeedLength { expected: usize, got: usize },
    #[error("output diverged at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error("bits_per_value must be in 1..=23, got {0}")]
    BadBitWidth(u32),
    #[error("dimension index {index} out of range for {dim}-dimensional output")]
    BadDimension { index: usize, dim: usize },
}

/// Outputs further than this many normalized ranges outside `[0, 1]` count
/// as divergence.
pub const DIVERGENCE_RANGES: f32 = 10.0;

#[derive(Debug, Clone)]
pub struct Oscillator<'m> {
    model: &'m AnnModel,
    seed: Vec<f32>,
    current: Vec<f32>,
    iteration: u64,
    hidden: Vec<f32>,
    next: Vec<f32>,
}

impl<'m> Oscillator<'m> {
    pub fn new(model: &'m AnnModel, seed: &[f32]) -> Result<Self, OscillatorError> {
        let a = model.arch;
        if a.input != a.output {
            return Err(OscillatorError::NotSquare(a.to_string()));
        }
        if seed.len() != a.input {
            return Err(OscillatorError::SeedLength {
                expected: a.input,
                got: seed.len(),
            });
        }
        Ok(Self {
            model,
            seed: seed.to_vec(),
            current: seed.to_vec(),
            iteration: 0,
            hidden: vec![0.0; a.hidden],
            next: vec![0.0; a.output],
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// The most recent output (the seed before the first step).
    pub fn current(&self) -> &[f32] {
        &self.current
    }

    pub fn seed(&self) -> &[f32] {
        &self.seed
    }

    /// Advances one iteration and returns the new output.
    pub fn step(&mut self) -> Result<&[f32], OscillatorError> {
        let input = if self.iteration == 0 {
            &self.seed
        } else {
            &self.current
        };
        self.model
            .forward_into(input, &mut self.hidden, &mut self.next, &mut ());
        let lo = -DIVERGENCE_RANGES;
        let hi = 1.0 + DIVERGENCE_RANGES;
        if self
            .next
            .iter()
            .any(|v| !(v.is_finite() && *v >= lo && *v <= hi))
        {
            return Err(OscillatorError::NonFinite {
                iteration: self.iteration + 1,
            });
        }
        std::mem::swap(&mut self.current, &mut self.next);
        self.iteration += 1;
        Ok(&self.current)
    }

    /// Runs `iterations` steps, returning the outputs row-major.
    pub fn generate(&mut self, iterations: usize) -> Result<Vec<f32>, OscillatorError> {
        let mut out = Vec::with_capacity(iterations * self.current.len());
        for _ in 0..iterations {
            out.extend_from_slice(self.step()?);
        }
        Ok(out)
    }

    /// Maps normalized outputs back to system coordinates.
    pub fn denormalize(&self, row: &[f32]) -> Vec<f64> {
        row.iter()
            .zip(&self.model.norm_stats)
            .map(|(v, s)| s.denormalize(*v))
            .collect()
    }
}

/// Convenience wrapper: fresh oscillator, `iterations` steps.
pub fn generate(
    model: &AnnModel,
    seed: &[f32],
    iterations: usize,
) -> Result<Vec<f32>, OscillatorError> {
    Oscillator::new(model, seed)?.generate(iterations)
}

/// Packed bit sequence, most significant bit first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let len = bytes.len() * 8;
        Self { bytes, len }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::new();
        bits.into_iter().for_each(|b| s.push(b));
        s
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Packed bytes; a trailing partial byte is zero-padded.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.bytes.truncate(len.div_ceil(8));
        if !len.is_multiple_of(8) {
            let keep = 0xffu8 << (8 - len % 8);
            *self.bytes.last_mut().unwrap() &= keep;
        }
    }
}

/// Takes the low `bits_per_value` mantissa bits of each selected dimension of
/// each row, most significant first, in row-major order.
pub fn extract_bits(
    outputs: &[f32],
    row_len: usize,
    bits_per_value: u32,
    dims: &[usize],
) -> Result<BitStream, OscillatorError> {
    if !(1..=23).contains(&bits_per_value) {
        return Err(OscillatorError::BadBitWidth(bits_per_value));
    }
    if let Some(&index) = dims.iter().find(|d| **d >= row_len) {
        return Err(OscillatorError::BadDimension {
            index,
            dim: row_len,
        });
    }
    let mut out = BitStream::new();
    for row in outputs.chunks_exact(row_len) {
        for &d in dims {
            let bits = row[d].to_bits();
            for k in (0..bits_per_value).rev() {
                out.push(bits >> k & 1 == 1);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::{Activation, Arch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn contraction() -> AnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = AnnModel::zeros(Arch::new(3, 8, 3), Activation::Tanh);
        for p in m.w1.iter_mut().chain(&mut m.w2) {
            *p = rng.gen_range(-0.3..0.3);
        }
        for p in m.b1.iter_mut().chain(&mut m.b2) {
            *p = rng.gen_range(0.0..0.5);
        }
        m
    }

    #[test]
    fn fixed_point_model_is_constant() {
        let mut m = AnnModel::zeros(Arch::new(3, 4, 3), Activation::Relu);
        let seed = [0.25f32, 0.5, 0.75];
        m.b2 = seed.to_vec();
        let out = generate(&m, &seed, 20).unwrap();
        assert!(out.chunks(3).all(|r| r == seed));
    }

    #[test]
    fn steps_compose_forward() {
        let m = contraction();
        let seed = [0.1f32, 0.2, 0.3];
        let mut osc = Oscillator::new(&m, &seed).unwrap();
        let mut expect = seed.to_vec();
        for k in 1..=50 {
            expect = m.forward(&expect);
            assert_eq!(osc.step().unwrap(), expect.as_slice());
            assert_eq!(osc.iteration(), k);
        }
        let one = generate(&m, &seed, 1).unwrap();
        assert_eq!(one, m.forward(&seed));
    }

    #[test]
    fn divergence_detected() {
        let mut m = AnnModel::zeros(Arch::new(1, 1, 1), Activation::Relu);
        m.w1[0] = 1.0;
        m.w2[0] = 2.0;
        let err = generate(&m, &[1.0], 100).unwrap_err();
        // 2, 4, 8, 16 > 11
        assert_eq!(err, OscillatorError::NonFinite { iteration: 4 });
    }

    #[test]
    fn rejects_non_square() {
        let m = AnnModel::zeros(Arch::new(3, 4, 2), Activation::Relu);
        assert!(matches!(
            Oscillator::new(&m, &[0.0; 3]),
            Err(OscillatorError::NotSquare(_))
        ));
    }

    #[test]
    fn mantissa_bits() {
        let one = f32::from_bits(0x3F80_0000);
        let next = f32::from_bits(0x3F80_0001);
        assert_eq!(
            extract_bits(&[one], 1, 8, &[0]).unwrap().as_bytes(),
            &[0x00]
        );
        assert_eq!(
            extract_bits(&[next], 1, 8, &[0]).unwrap().as_bytes(),
            &[0x01]
        );
        let rows = vec![0.3f32; 3000];
        assert_eq!(extract_bits(&rows, 3, 8, &[0, 1, 2]).unwrap().len(), 24_000);
        assert_eq!(
            extract_bits(&rows, 3, 24, &[0]),
            Err(OscillatorError::BadBitWidth(24))
        );
        assert!(matches!(
            extract_bits(&rows, 3, 8, &[3]),
            Err(OscillatorError::BadDimension { .. })
        ));
    }

    #[test]
    fn dim_order_permutes_stream() {
        let rows = [f32::from_bits(0x3F80_00AB), f32::from_bits(0x3F80_00CD)];
        let ab = extract_bits(&rows, 2, 8, &[0, 1]).unwrap();
        let ba = extract_bits(&rows, 2, 8, &[1, 0]).unwrap();
        assert_eq!(ab.as_bytes(), &[0xAB, 0xCD]);
        assert_eq!(ba.as_bytes(), &[0xCD, 0xAB]);
    }

    #[test]
    fn bitstream_push_and_truncate() {
        let mut s =
            BitStream::from_bits([true, false, true, true, false, false, true, false, true]);
        assert_eq!(s.len(), 9);
        assert_eq!(s.as_bytes(), &[0b1011_0010, 0b1000_0000]);
        s.truncate(3);
        assert_eq!(s.as_bytes(), &[0b1010_0000]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![true, false, true]);
    }
}
