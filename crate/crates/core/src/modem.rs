//! One-dimensional ASK constellations, packet generation and hard detection.
//!
//! Constellation points are kept as exact odd integers; every amplitude
//! scaling lives in the channel coefficients. Because no point is zero, the
//! combining weights `I(k) / I(k+1)` are always defined.

use rand::Rng;

use crate::error::{Error, Result};

/// A `q`-ary ASK alphabet `{-q+1, -q+3, ..., q-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constellation {
    order: u32,
    points: Vec<i32>,
}

impl Constellation {
    pub fn new(order: i64) -> Result<Self> {
        if order < 2 || order % 2 != 0 || order > i64::from(u16::MAX) {
            return Err(Error::InvalidOrder(order));
        }
        let q = order as i32;
        let points = (0..q).map(|i| -q + 1 + 2 * i).collect();
        Ok(Self {
            order: order as u32,
            points,
        })
    }

    pub fn bpsk() -> Self {
        Self::new(2).expect("2 is a valid order")
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn points(&self) -> &[i32] {
        &self.points
    }

    pub fn contains(&self, symbol: i32) -> bool {
        // Odd and within range.
        symbol % 2 != 0 && symbol.unsigned_abs() < self.order
    }

    /// `E{a^2}` for uniformly distributed symbols: `(q^2 - 1) / 3`.
    pub fn mean_square(&self) -> f64 {
        let q = f64::from(self.order);
        (q * q - 1.0) / 3.0
    }

    /// `E{1/a^2}` for uniformly distributed symbols.
    pub fn mean_inverse_square(&self) -> f64 {
        let sum: f64 = self.points.iter().map(|&a| 1.0 / f64::from(a * a)).sum();
        sum / f64::from(self.order)
    }

    /// Nearest constellation point to `z`; ties resolve toward the larger point.
    pub fn slice(&self, z: f64) -> i32 {
        let q = self.order as i32;
        // Points sit at odd integers, decision boundaries at even ones.
        let idx = ((z + f64::from(q)) / 2.0).floor();
        let idx = idx.clamp(0.0, f64::from(q - 1)) as i32;
        -q + 1 + 2 * idx
    }
}

/// Which transmitter a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Target,
    Interferer,
}

/// A packet of constellation symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    symbols: Vec<i32>,
    role: Role,
}

impl SymbolStream {
    pub fn new(symbols: Vec<i32>, role: Role, constellation: &Constellation) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::StreamTooShort(symbols.len()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| !constellation.contains(s)) {
            return Err(Error::NotInConstellation {
                symbol: bad,
                order: constellation.order(),
            });
        }
        Ok(Self { symbols, role })
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.symbols.iter().map(|&s| f64::from(s)).collect()
    }
}

/// Draw `n` i.i.d. uniform symbols from the `q`-ary constellation.
pub fn generate_stream<R: Rng + ?Sized>(
    order: i64,
    n: usize,
    role: Role,
    rng: &mut R,
) -> Result<SymbolStream> {
    let constellation = Constellation::new(order)?;
    if n < 2 {
        return Err(Error::StreamTooShort(n));
    }
    let points = constellation.points();
    let symbols = (0..n)
        .map(|_| points[rng.random_range(0..points.len())])
        .collect();
    Ok(SymbolStream { symbols, role })
}

/// Sign detector for BPSK; `z = 0` decides `+1`.
pub fn detect_bpsk(z: &[f64]) -> Vec<i32> {
    z.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect()
}

/// Nearest-point detector for any ASK order.
pub fn detect(z: &[f64], constellation: &Constellation) -> Vec<i32> {
    z.iter().map(|&v| constellation.slice(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constellation_points() {
        assert_eq!(Constellation::new(2).unwrap().points(), &[-1, 1]);
        assert_eq!(Constellation::new(4).unwrap().points(), &[-3, -1, 1, 3]);
        assert!(Constellation::new(3).is_err());
        assert!(Constellation::new(0).is_err());
        assert!(Constellation::new(-2).is_err());
    }

    #[test]
    fn inverse_square_moments() {
        assert_eq!(Constellation::bpsk().mean_inverse_square(), 1.0);
        let c4 = Constellation::new(4).unwrap();
        assert!((c4.mean_inverse_square() - (1.0 + 1.0 / 9.0) / 2.0).abs() < 1e-15);
        assert_eq!(c4.mean_square(), 5.0);
    }

    #[test]
    fn generate_bpsk_and_4ask() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = generate_stream(2, 4, Role::Target, &mut rng).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.symbols().iter().all(|&v| v == 1 || v == -1));
        let s = generate_stream(4, 3, Role::Interferer, &mut rng).unwrap();
        assert!(s.symbols().iter().all(|v| [-3, -1, 1, 3].contains(v)));
        assert_eq!(s.role(), Role::Interferer);
    }

    #[test]
    fn generate_rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(matches!(
            generate_stream(3, 10, Role::Target, &mut rng),
            Err(Error::InvalidOrder(3))
        ));
        assert!(matches!(
            generate_stream(2, 1, Role::Target, &mut rng),
            Err(Error::StreamTooShort(1))
        ));
    }

    #[test]
    fn bpsk_sample_mean_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let s = generate_stream(2, 100_000, Role::Target, &mut rng).unwrap();
        let mean = s.symbols().iter().map(|&v| f64::from(v)).sum::<f64>() / 1e5;
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn sign_rule_and_tie() {
        assert_eq!(detect_bpsk(&[0.3, -0.01, 2.0]), vec![1, -1, 1]);
        assert_eq!(detect_bpsk(&[0.0]), vec![1]);
    }

    #[test]
    fn ask_slicer() {
        let c4 = Constellation::new(4).unwrap();
        assert_eq!(
            detect(&[-10.0, -2.1, -0.5, 0.0, 1.9, 2.0, 7.0], &c4),
            vec![-3, -3, -1, 1, 1, 3, 3]
        );
    }

    #[test]
    fn stream_validation() {
        let c = Constellation::bpsk();
        assert!(SymbolStream::new(vec![1, 0], Role::Target, &c).is_err());
        assert!(SymbolStream::new(vec![1], Role::Target, &c).is_err());
        assert!(SymbolStream::new(vec![1, -1], Role::Target, &c).is_ok());
    }

    proptest! {
        #[test]
        fn detection_is_scale_invariant(z in proptest::collection::vec(-5.0f64..5.0, 1..64), c in 1e-3f64..1e3) {
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            prop_assert_eq!(detect_bpsk(&z), detect_bpsk(&scaled));
        }

        #[test]
        fn equal_seeds_give_equal_streams(seed in any::<u64>(), n in 2usize..200) {
            let a = generate_stream(4, n, Role::Target, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = generate_stream(4, n, Role::Target, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
