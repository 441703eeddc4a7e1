//! Independent reference arithmetic for integration tests. Nothing here
//! touches the crate's own field tables.
#![allow(dead_code)]

/// Shift-and-add multiply modulo x^8 + x^4 + x^3 + x^2 + 1.
pub fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1D;
        }
        b >>= 1;
    }
    p
}

/// a^254 = a^-1 for a != 0.
pub fn gf_inv(a: u8) -> u8 {
    assert_ne!(a, 0);
    let mut r = 1u8;
    for _ in 0..254 {
        r = gf_mul(r, a);
    }
    r
}

/// Rank of a matrix over GF(2^8) by plain Gaussian elimination.
pub fn rank(mut rows: Vec<Vec<u8>>) -> usize {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    for r in rows.iter_mut() {
        r.resize(cols, 0);
    }
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = gf_inv(rows[rank][c]);
        let pivot: Vec<u8> = rows[rank].iter().map(|&x| gf_mul(x, inv)).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[c] != 0 {
                let f = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x ^= gf_mul(f, y);
                }
            }
        }
        rows[rank] = pivot;
        rank += 1;
    }
    rank
}

/// Solves `A x = b` row-wise for the unknown symbols when `A` has full column
/// rank; returns `None` otherwise.
pub fn solve(coeffs: &[Vec<u8>], payloads: &[Vec<u8>], n: usize) -> Option<Vec<Vec<u8>>> {
    let s = payloads.first().map_or(0, Vec::len);
    let mut rows: Vec<Vec<u8>> = coeffs
        .iter()
        .zip(payloads)
        .map(|(c, p)| {
            let mut r = c.clone();
            r.resize(n, 0);
            r.extend_from_slice(p);
            r
        })
        .collect();
    for (r, c) in (0..n).enumerate() {
        let p = (r..rows.len()).find(|&i| rows[i][c] != 0)?;
        rows.swap(r, p);
        let inv = gf_inv(rows[r][c]);
        let pivot: Vec<u8> = rows[r].iter().map(|&x| gf_mul(x, inv)).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let f = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x ^= gf_mul(f, y);
                }
            }
        }
        rows[r] = pivot;
    }
    Some(rows[..n].iter().map(|row| row[n..n + s].to_vec()).collect())
}

/// Probability that `m` uniformly random vectors in GF(256)^m are independent:
/// prod_{k=1..m} (1 - 256^-k).
pub fn full_rank_probability(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 - 256f64.powi(-(k as i32))).product()
}

pub fn load_fixture(name: &str) -> Vec<u8> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let hex: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(hex).expect("fixture is hex")
}

/// Fixture files paired with the packet each one encodes, written out by
/// hand field by field.
pub fn goldens() -> Vec<(&'static str, ncsat_core::CodedPacket)> {
    use ncsat_core::CodedPacket;
    vec![
        (
            "minimal_k1_s3.hex",
            CodedPacket {
                generation_id: 0,
                generation_size: 1,
                coefficients: vec![0x01],
                payload: vec![0x00, 0x01, 0xAB],
                final_emission: false,
            },
        ),
        (
            "final_k2_s6.hex",
            CodedPacket {
                generation_id: 0x0102_0304,
                generation_size: 2,
                coefficients: vec![0x53, 0xCA],
                payload: vec![0x00, 0x01, 0xFF, 0, 0, 0],
                final_emission: true,
            },
        ),
        (
            "prefix_k3_of_30.hex",
            CodedPacket {
                generation_id: 7,
                generation_size: 30,
                coefficients: vec![0x10, 0x20, 0x30],
                payload: (0..16).collect(),
                final_emission: false,
            },
        ),
        (
            "full_30_s1402.hex",
            CodedPacket {
                generation_id: u32::MAX,
                generation_size: 30,
                coefficients: (1..=30).collect(),
                payload: (0..1402usize).map(|i| (i * 7) as u8).collect(),
                final_emission: false,
            },
        ),
        (
            "partial_seal_k5.hex",
            CodedPacket {
                generation_id: 42,
                generation_size: 5,
                coefficients: vec![9, 8, 7, 6, 5],
                payload: vec![0x00, 0x03, 0x45, 0x00, 0x28, 0, 0, 0],
                final_emission: true,
            },
        ),
    ]
}

/// Checks every golden fixture in both directions.
pub fn check_goldens() -> Result<usize, String> {
    let all = goldens();
    for (name, packet) in &all {
        let bytes = load_fixture(name);
        let parsed = ncsat_core::framing::parse(&bytes).map_err(|e| format!("{name}: {e}"))?;
        if &parsed != packet {
            return Err(format!("{name}: parsed {parsed:?}"));
        }
        if ncsat_core::framing::serialize(packet) != bytes {
            return Err(format!("{name}: serialization differs"));
        }
    }
    Ok(all.len())
}

/// Feeds random and mutated datagrams to the parser. Every input must either
/// parse into a packet that re-serializes to the same bytes (up to reserved
/// flag bits) or fail with an error. Panics propagate.
pub fn fuzz_parse(iterations: usize, seed: u64) -> Result<(usize, usize), String> {
    use rand::{Rng, RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Vec<u8>> = goldens().iter().map(|(n, _)| load_fixture(n)).collect();
    let (mut ok, mut rejected) = (0, 0);
    for i in 0..iterations {
        let bytes = match i % 3 {
            0 => {
                let mut b = vec![0u8; rng.random_range(0..64)];
                rng.fill_bytes(&mut b);
                b
            }
            1 => {
                let mut b = seeds[rng.random_range(0..seeds.len())].clone();
                for _ in 0..rng.random_range(1..4) {
                    let at = rng.random_range(0..b.len());
                    b[at] = rng.random();
                }
                b
            }
            _ => {
                let mut b = seeds[rng.random_range(0..seeds.len())].clone();
                match rng.random_range(0..3) {
                    0 => b.truncate(rng.random_range(0..b.len())),
                    1 => b.push(rng.random()),
                    _ => {
                        // Plausible header with random field values.
                        b[1] = rng.random();
                        b[6..12].iter_mut().for_each(|x| *x = rng.random_range(0..4));
                    }
                }
                b
            }
        };
        match ncsat_core::framing::parse(&bytes) {
            Ok(cp) => {
                let mut expect = bytes.clone();
                expect[1] &= 0x01;
                if ncsat_core::framing::serialize(&cp) != expect {
                    return Err(format!("input {} did not round-trip", hex::encode(&bytes)));
                }
                ok += 1;
            }
            Err(_) => rejected += 1,
        }
    }
    Ok((ok, rejected))
}
