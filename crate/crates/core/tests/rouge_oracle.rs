use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_uq::text::{lcs_len, rouge_l};

/// Longest subsequence of `a` (by exhaustive enumeration) that is also a
/// subsequence of `b`.
fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let is_subseq = |s: &[u8]| {
        let mut it = b.iter();
        s.iter().all(|x| it.any(|y| y == x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let len = mask.count_ones() as usize;
        if len <= best {
            continue;
        }
        let sub: Vec<u8> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
        if is_subseq(&sub) {
            best = len;
        }
    }
    best
}

#[test]
fn lcs_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..500 {
        let la = rng.random_range(0..=12);
        let lb = rng.random_range(0..=12);
        let vocab = rng.random_range(1..=6u8);
        let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..vocab)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..vocab)).collect();
        let lcs = brute_lcs(&a, &b);
        assert_eq!(lcs_len(&a, &b), lcs, "{a:?} {b:?}");
        let s = rouge_l(&a, &b);
        let p = if la == 0 { 0.0 } else { lcs as f64 / la as f64 };
        let r = if lb == 0 { 0.0 } else { lcs as f64 / lb as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        assert_eq!((s.precision, s.recall, s.fmeasure), (p, r, f));
    }
}
