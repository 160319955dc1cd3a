use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_uq::affinity::{AffinityMatrix, AffinitySource};
use spectral_uq::spectral::{degree_uncertainty, laplacian, spectral_scores, LaplacianKind};

fn random_affinity(m: usize, rng: &mut ChaCha8Rng) -> AffinityMatrix {
    let upper: Vec<f64> = (0..m * m).map(|_| rng.random_range(0.0..1.0)).collect();
    AffinityMatrix::from_upper(m, AffinitySource::Css, |i, j| upper[i * m + j])
}

fn find(parent: &mut [usize], x: usize) -> usize {
    if parent[x] != x {
        let root = find(parent, parent[x]);
        parent[x] = root;
    }
    parent[x]
}

fn union_find_components(w: &AffinityMatrix) -> usize {
    let m = w.m();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in i + 1..m {
            if w.get(i, j) > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..m).filter(|&i| find(&mut parent, i) == i).count()
}

#[test]
fn block_diagonal_eig_counts_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..200 {
        let m = rng.random_range(2..=12);
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        let w = AffinityMatrix::from_upper(m, AffinitySource::Css, |i, j| f64::from(u8::from(labels[i] == labels[j])));
        let r = spectral_scores(&w, LaplacianKind::Normalized).unwrap();
        let want = union_find_components(&w) as f64;
        assert!((r.u_eig - want).abs() < 1e-9, "trial {trial}: {} vs {want}", r.u_eig);
        if want == 1.0 {
            assert!(r.u_ecc < 1e-8);
        }
    }
}

#[test]
fn complete_graph_closed_form() {
    for m in 2..=20 {
        let w = AffinityMatrix::new(Array2::from_elem((m, m), 1.0), AffinitySource::Css).unwrap();
        let r = spectral_scores(&w, LaplacianKind::Normalized).unwrap();
        assert!(r.spectrum.eigenvalues[0].abs() < 1e-8);
        assert!(r.spectrum.eigenvalues[1..].iter().all(|l| (l - 1.0).abs() < 1e-8));
        assert_eq!(r.u_eig, 1.0);
        assert_eq!(r.u_deg, 0.0);
    }
}

#[test]
fn spectrum_bounds_and_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let m = rng.random_range(2..=20);
        let w = random_affinity(m, &mut rng);
        let r = spectral_scores(&w, LaplacianKind::Normalized).unwrap();
        let l = &r.spectrum.eigenvalues;
        assert!(l.windows(2).all(|p| p[0] <= p[1]));
        assert!(l[0].abs() <= 1e-8);
        assert!(l.iter().all(|&x| (-1e-8..=2.0 + 1e-8).contains(&x)));
        assert!(r.u_eig >= 1.0);
        let v = &r.spectrum.eigenvectors;
        let gram = v.t().dot(v);
        let recon = v.dot(&Array2::from_diag(&ndarray::arr1(l))).dot(&v.t());
        let err = (&recon - &laplacian(&w, LaplacianKind::Normalized)).mapv(|x| x * x).sum().sqrt();
        assert!(err < 1e-7, "{err}");
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn scores_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let m = rng.random_range(2..=15);
        let w = random_affinity(m, &mut rng);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        let a = spectral_scores(&w, LaplacianKind::Normalized).unwrap();
        let b = spectral_scores(&w.permuted(&perm), LaplacianKind::Normalized).unwrap();
        assert!((a.u_deg - b.u_deg).abs() < 1e-9);
        assert!((a.u_eig - b.u_eig).abs() < 1e-9);
        assert!((a.u_ecc - b.u_ecc).abs() < 1e-9, "{} {}", a.u_ecc, b.u_ecc);
    }
}

#[test]
fn degree_uncertainty_decreases_in_every_entry() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let m = rng.random_range(2..=12);
        let w = random_affinity(m, &mut rng);
        let (i, j) = loop {
            let (i, j) = (rng.random_range(0..m), rng.random_range(0..m));
            if i != j && w.get(i, j) < 1.0 {
                break (i, j);
            }
        };
        let bump = rng.random_range(0.0..1.0 - w.get(i, j)).max(1e-6);
        let mut raised = w.clone().into_inner();
        raised[[i, j]] = (raised[[i, j]] + bump).min(1.0);
        raised[[j, i]] = raised[[i, j]];
        let raised = AffinityMatrix::new(raised, AffinitySource::Css).unwrap();
        assert!(degree_uncertainty(&raised) < degree_uncertainty(&w));
    }
}
