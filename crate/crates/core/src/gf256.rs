//! Arithmetic in GF(2^8) with the reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Coding coefficients and symbol bytes are both field elements. Addition is
//! XOR; multiplication goes through log/exp tables, and the bulk
//! multiply-accumulate used by the codec reads one 256-byte row of a full
//! product table per coefficient.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub};
use std::sync::LazyLock;

use thiserror::Error;

/// Reduction polynomial, including the x^8 term.
pub const POLYNOMIAL: u16 = 0x11D;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf256Error {
    #[error("no inverse of zero")]
    ZeroInverse,
    #[error("length mismatch: dst has {dst} bytes, src has {src}")]
    LengthMismatch { dst: usize, src: usize },
}

// 2 generates the multiplicative group for 0x11D; exp is doubled so that
// log(a) + log(b) indexes it without a modulo.
const fn gen_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLYNOMIAL;
        }
        i += 1;
    }
    exp[510] = exp[0];
    exp[511] = exp[1];
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = gen_tables();
static EXP: [u8; 512] = TABLES.0;
static LOG: [u8; 256] = TABLES.1;

static MUL_TABLE: LazyLock<Box<[[u8; 256]; 256]>> = LazyLock::new(|| {
    let mut t = Box::new([[0u8; 256]; 256]);
    for a in 1..256usize {
        let la = LOG[a] as usize;
        for b in 1..256usize {
            t[a][b] = EXP[la + LOG[b] as usize];
        }
    }
    t
});

/// Field addition (XOR).
#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

/// Field multiplication.
#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
}

/// Multiplicative inverse.
#[inline]
pub fn inv(a: u8) -> Result<u8, Gf256Error> {
    if a == 0 {
        return Err(Gf256Error::ZeroInverse);
    }
    Ok(EXP[255 - LOG[a as usize] as usize])
}

/// Products of every field element with `c`: `row[x] == mul(c, x)`.
#[inline]
pub fn mul_row(c: u8) -> &'static [u8; 256] {
    &MUL_TABLE[c as usize]
}

/// `dst[k] += c * src[k]` for every k.
pub fn axpy(dst: &mut [u8], src: &[u8], c: u8) -> Result<(), Gf256Error> {
    if dst.len() != src.len() {
        return Err(Gf256Error::LengthMismatch {
            dst: dst.len(),
            src: src.len(),
        });
    }
    match c {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        _ => {
            let row = mul_row(c);
            dst.iter_mut()
                .zip(src)
                .for_each(|(d, s)| *d ^= row[*s as usize]);
        }
    }
    Ok(())
}

/// `buf[k] *= c` for every k.
pub fn scale(buf: &mut [u8], c: u8) {
    match c {
        0 => buf.fill(0),
        1 => {}
        _ => {
            let row = mul_row(c);
            buf.iter_mut().for_each(|b| *b = row[*b as usize]);
        }
    }
}

/// A GF(2^8) element.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn inv(self) -> Result<Gf256, Gf256Error> {
        inv(self.0).map(Gf256)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl From<Gf256> for u8 {
    fn from(v: Gf256) -> Self {
        v.0
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(add(self.0, rhs.0))
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 = add(self.0, rhs.0);
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(add(self.0, rhs.0))
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(mul(self.0, rhs.0))
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        self.0 = mul(self.0, rhs.0);
    }
}

impl Div for Gf256 {
    type Output = Gf256;
    /// Panics when dividing by zero.
    fn div(self, rhs: Gf256) -> Gf256 {
        let r = rhs.inv().expect("division by zero in GF(2^8)");
        Gf256(mul(self.0, r.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Carry-less multiply then reduce modulo 0x11D, bit by bit.
    fn mul_reference(a: u8, b: u8) -> u8 {
        let mut product: u16 = 0;
        for bit in 0..8 {
            if b & (1 << bit) != 0 {
                product ^= (a as u16) << bit;
            }
        }
        for bit in (8..16).rev() {
            if product & (1 << bit) != 0 {
                product ^= POLYNOMIAL << (bit - 8);
            }
        }
        product as u8
    }

    #[test]
    fn add_examples() {
        assert_eq!(add(0x57, 0x83), 0xD4);
        assert_eq!(add(0x00, 0xAB), 0xAB);
        assert_eq!(add(0x5C, 0x5C), 0x00);
    }

    #[test]
    fn mul_examples() {
        assert_eq!(mul(0x00, 0xFF), 0x00);
        assert_eq!(mul(0x01, 0x9C), 0x9C);
        assert_eq!(mul_reference(0x02, 0x87), 0x13);
        assert_eq!(mul(0x02, 0x87), 0x13);
    }

    #[test]
    fn table_mul_matches_reference_on_all_pairs() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                let expect = mul_reference(a, b);
                assert_eq!(mul(a, b), expect, "mul({a:#x},{b:#x})");
                assert_eq!(mul_row(a)[b as usize], expect);
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_pairs() {
        for a in 0..=255u8 {
            assert_eq!(add(a, a), 0);
            assert_eq!(mul(a, 1), a);
            assert_eq!(mul(a, 0), 0);
            for b in 0..=255u8 {
                assert_eq!(add(a, b), add(b, a));
                assert_eq!(mul(a, b), mul(b, a));
            }
        }
    }

    #[test]
    fn associativity_and_distributivity_sampled() {
        // Deterministic stride through the 2^24 triples.
        let mut x: u32 = 12345;
        for _ in 0..200_000 {
            x = x.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            let (a, b, c) = ((x >> 8) as u8, (x >> 16) as u8, (x >> 24) as u8);
            assert_eq!(mul(mul(a, b), c), mul(a, mul(b, c)));
            assert_eq!(add(add(a, b), c), add(a, add(b, c)));
            assert_eq!(mul(a, add(b, c)), add(mul(a, b), mul(a, c)));
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inv(0x01), Ok(0x01));
        assert_eq!(inv(0x00), Err(Gf256Error::ZeroInverse));
        assert_eq!(Gf256Error::ZeroInverse.to_string(), "no inverse of zero");
        for a in 1..=255u8 {
            assert_eq!(mul(a, inv(a).unwrap()), 1);
        }
        // Exhaustive search for the inverse of 2.
        let found: Vec<u8> = (1..=255u8).filter(|&b| mul_reference(2, b) == 1).collect();
        assert_eq!(found.len(), 1);
        assert_eq!(inv(0x02), Ok(found[0]));
    }

    #[test]
    fn axpy_examples() {
        let mut d = [0u8, 0];
        axpy(&mut d, &[0xAA, 0xBB], 0x01).unwrap();
        assert_eq!(d, [0xAA, 0xBB]);

        let mut v = [0x12u8, 0x34, 0x56];
        axpy(&mut v, &[0xFF, 0xEE, 0xDD], 0x00).unwrap();
        assert_eq!(v, [0x12, 0x34, 0x56]);

        let mut d = [0x57u8, 0x00];
        axpy(&mut d, &[0x83, 0x02], 0x02).unwrap();
        assert_eq!(
            d,
            [0x57 ^ mul_reference(0x02, 0x83), mul_reference(0x02, 0x02)]
        );

        let mut short = [0u8; 2];
        assert_eq!(
            axpy(&mut short, &[1, 2, 3], 7),
            Err(Gf256Error::LengthMismatch { dst: 2, src: 3 })
        );
    }

    #[test]
    fn scale_matches_mul() {
        let mut buf: Vec<u8> = (0..=255u8).collect();
        scale(&mut buf, 0x1D);
        for (x, y) in buf.iter().enumerate() {
            assert_eq!(*y, mul_reference(0x1D, x as u8));
        }
    }

    #[test]
    fn newtype_ops() {
        let a = Gf256(0x53);
        let b = Gf256(0xCA);
        assert_eq!(a + b, Gf256(0x53 ^ 0xCA));
        assert_eq!((a * b) / b, a);
        assert!(Gf256::ZERO.inv().is_err());
    }
}
