//! Deformations of linear systems along commuting linear symmetries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigmared::jet::{SigmaSpec, VectorField};
use sigmared::symmetry::{check_ds_sigma_symmetry, construct_sigma_symmetric, SymmetrySet};
use sigmared::system::DynSystem;
use sigmared::{Expr, ZeroTest};

fn linear(m: &[[i64; 3]; 3]) -> Vec<Expr> {
    m.iter()
        .map(|row| Expr::add_all(row.iter().enumerate().map(|(j, &c)| Expr::int(c).mul(&Expr::u(j + 1)))))
        .collect()
}

fn square(m: &[[i64; 3]; 3]) -> [[i64; 3]; 3] {
    let mut out = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| m[i][k] * m[k][j]).sum();
        }
    }
    out
}

fn random_mu(rng: &mut ChaCha8Rng) -> Expr {
    let terms = rng.gen_range(1..=3);
    Expr::add_all((0..terms).map(|_| {
        let deg = rng.gen_range(0..=2);
        let c = Expr::int(rng.gen_range(1..=3) * if rng.gen_bool(0.5) { 1 } else { -1 });
        Expr::mul_all(std::iter::once(c).chain((0..deg).map(|_| Expr::u(rng.gen_range(1..=3)))))
    }))
}

#[test]
fn twenty_random_deformations_are_sigma_symmetric() {
    let zt = ZeroTest::new(100, 17);
    let mut done = 0;
    let mut seed = 0u64;
    while done < 20 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = [[0i64; 3]; 3];
        for row in b.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.gen_range(-2..=2);
            }
        }
        // f = B² u commutes with the dilation and with B u.
        let fields = vec![VectorField::vertical(linear(&[[1, 0, 0], [0, 1, 0], [0, 0, 1]])), VectorField::vertical(linear(&b))];
        let Ok(set) = SymmetrySet::new(fields, SigmaSpec::zero(2), &zt) else { continue };
        if set.rank < 2 {
            continue;
        }
        let base = DynSystem::new(linear(&square(&b))).unwrap();
        assert!(check_ds_sigma_symmetry(&base, &set, &zt).passed(), "seed {seed}: base not symmetric");
        let mu = [random_mu(&mut rng), random_mu(&mut rng)];
        let (star, spec) = construct_sigma_symmetric(&base, &set, &mu, &zt).unwrap();
        let deformed = SymmetrySet { spec, ..set };
        let rep = check_ds_sigma_symmetry(&star, &deformed, &zt);
        assert!(rep.passed() && rep.max_abs() < 1e-8, "seed {seed}: {:?}", rep.failures().next());
        done += 1;
    }
}
