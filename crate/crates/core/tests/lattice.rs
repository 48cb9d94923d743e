use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sympflux::lattice::{self, is_hamiltonian_endpoint, map_flux, HAMILTONIAN_TOL};
use sympflux::probes::hamiltonian_flow;
use sympflux::{DiffeoMap, FluxLattice, FluxVector, Hamiltonian, HamiltonianTag, IsotopyPath, OneFormField, ProductModel, TorusModel};

#[test]
fn unit_torus_generators() {
    let m = TorusModel::standard(1, 8).unwrap();
    let l = FluxLattice::torus(&m).unwrap();
    assert_eq!(l.rank, 2);
    // translating once around x is generated by dy, around y by -dx
    let expected = [[0.0, 1.0], [-1.0, 0.0]];
    for (g, e) in l.generators.iter().zip(expected) {
        for k in 0..2 {
            assert_abs_diff_eq!(g.coeffs[k], e[k], epsilon = 1e-8);
        }
    }
    assert_abs_diff_eq!(l.epsilon0(), 1.0, epsilon = 1e-12);
}

#[test]
fn rectangular_torus_generators() {
    let m = TorusModel::standard(1, 8).unwrap().with_periods(vec![2.0, 1.0]).unwrap();
    let l = FluxLattice::torus(&m).unwrap();
    let expected = [[0.0, 2.0], [-1.0, 0.0]];
    for (g, e) in l.generators.iter().zip(expected) {
        for k in 0..2 {
            assert_abs_diff_eq!(g.coeffs[k], e[k], epsilon = 1e-8);
        }
    }
    // |c dx_k|_{L2} = |c| sqrt(area) with area 2
    assert_abs_diff_eq!(l.generators[0].harmonic_l2, 2.0 * 2f64.sqrt(), epsilon = 1e-10);
    assert_abs_diff_eq!(l.epsilon0(), 2f64.sqrt(), epsilon = 1e-10);
}

#[test]
fn four_torus_lattice() {
    let m = TorusModel::standard(2, 8).unwrap();
    let l = FluxLattice::torus(&m).unwrap();
    assert_eq!(l.rank, 4);
    assert_abs_diff_eq!(l.epsilon0(), 1.0, epsilon = 1e-12);
    let cv = l.closest_vector(&[0.4, -1.2, 2.6, 0.1]).unwrap();
    assert_eq!(cv.point.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![0.0, -1.0, 3.0, 0.0]);
    let d2: f64 = [0.4f64, 0.2, 0.4, 0.1].iter().map(|v| v * v).sum();
    assert_abs_diff_eq!(cv.distance, d2.sqrt(), epsilon = 1e-10);
}

#[test]
fn closest_vector_examples() {
    let m = TorusModel::standard(1, 8).unwrap();
    let l = FluxLattice::torus(&m).unwrap();
    let cv = l.closest_vector(&[0.3, 0.0]).unwrap();
    assert_abs_diff_eq!(cv.distance, 0.3, epsilon = 1e-12);
    let cv = l.closest_vector(&[0.7, 0.0]).unwrap();
    assert_abs_diff_eq!(cv.distance, 0.3, epsilon = 1e-12);
    let cv = l.closest_vector(&[2.0, -3.0]).unwrap();
    assert!(cv.distance < 1e-12);
    let cv = l.closest_vector(&[0.5, 0.25]).unwrap();
    assert_abs_diff_eq!(cv.distance, (0.25f64 + 0.0625).sqrt(), epsilon = 1e-12);
}

#[test]
fn closest_vector_matches_brute_force_on_skewed_lattices() {
    let m = TorusModel::standard(1, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let a = vec![rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)];
        let b = vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.5)];
        let l = FluxLattice::from_generators(&m, vec![FluxVector::new(&m, a.clone()), FluxVector::new(&m, b.clone())]);
        let Ok(l) = l else { continue };
        let v = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        // real coordinates of v, then an integer box around them
        let det = a[0] * b[1] - a[1] * b[0];
        let ci = ((v[0] * b[1] - v[1] * b[0]) / det).round() as i64;
        let cj = ((a[0] * v[1] - a[1] * v[0]) / det).round() as i64;
        let mut best = f64::INFINITY;
        for i in ci - 60..=ci + 60 {
            for j in cj - 60..=cj + 60 {
                let p = [i as f64 * a[0] + j as f64 * b[0], i as f64 * a[1] + j as f64 * b[1]];
                best = best.min(((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt());
            }
        }
        let cv = l.closest_vector(&v).unwrap();
        assert_abs_diff_eq!(cv.distance, best, epsilon = 1e-10);
    }
}

#[test]
fn dependent_generators_are_rejected() {
    let m = TorusModel::standard(1, 8).unwrap();
    let g = vec![FluxVector::new(&m, vec![1.0, 2.0]), FluxVector::new(&m, vec![2.0, 4.0])];
    assert!(FluxLattice::from_generators(&m, g).is_err());
}

#[test]
fn hamiltonian_endpoint_examples() {
    let m = TorusModel::standard(1, 16).unwrap();
    let l = FluxLattice::torus(&m).unwrap();
    let yes = is_hamiltonian_endpoint(&FluxVector::new(&m, vec![1.0, -2.0]), &l).unwrap();
    assert!(yes.is_yes());
    let near = is_hamiltonian_endpoint(&FluxVector::new(&m, vec![1.0 + 1e-5, 0.0]), &l).unwrap();
    assert!(matches!(near, HamiltonianTag::Borderline { .. }));
    let no = is_hamiltonian_endpoint(&FluxVector::new(&m, vec![0.3, 0.0]), &l).unwrap();
    assert!(matches!(no, HamiltonianTag::No { .. }));
    assert_abs_diff_eq!(no.distance(), 0.3, epsilon = 1e-12);

    // the full loop around x is a lattice point, a Hamiltonian flow has zero flux
    let dy = OneFormField::constant(&m, &[0.0, 1.0]);
    let full = IsotopyPath::constant(&m, 4, &dy).unwrap();
    assert!(is_hamiltonian_endpoint(&full.flux(), &l).unwrap().is_yes());
    let ham = IsotopyPath::constant(&m, 4, &Hamiltonian::mode(0.1, &[1, 2]).form(&m)).unwrap();
    assert!(ham.flux().harmonic_l2 <= HAMILTONIAN_TOL);
}

#[test]
fn map_flux_examples() {
    let m = TorusModel::standard(1, 16).unwrap();
    let f = map_flux(&DiffeoMap::translation(&m, &[0.3, 0.2]));
    assert_abs_diff_eq!(f.coeffs[0], -0.2, epsilon = 1e-14);
    assert_abs_diff_eq!(f.coeffs[1], 0.3, epsilon = 1e-14);
    let shear = hamiltonian_flow(&m, &Hamiltonian::mode(0.05, &[1, 0]), 16).unwrap();
    assert!(map_flux(&shear).harmonic_l2 < 1e-12);
    // path flux and map flux agree for a symplectic isotopy
    let alpha = OneFormField::constant(&m, &[0.1, 0.25]).add(&Hamiltonian::mode(0.02, &[1, 1]).form(&m));
    let path = IsotopyPath::constant(&m, 16, &alpha).unwrap();
    let fm = map_flux(&path.endpoint().unwrap());
    for k in 0..2 {
        assert_abs_diff_eq!(fm.coeffs[k], path.flux().coeffs[k], epsilon = 1e-8);
    }
}

#[test]
fn product_lattice_is_the_direct_sum() {
    let left = TorusModel::standard(1, 8).unwrap();
    let right = TorusModel::standard(1, 8).unwrap().with_periods(vec![1.0, 2.0]).unwrap();
    let pm = ProductModel::new(&left, &right).unwrap();
    let direct = FluxLattice::torus(&left).unwrap().direct_sum(&FluxLattice::torus(&right).unwrap(), &pm.product).unwrap();
    let whole = FluxLattice::torus(&pm.product).unwrap();
    assert_eq!(direct.rank, 4);
    for (a, b) in direct.generators.iter().zip(&whole.generators) {
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-8);
        }
    }
    let flux = pm.product_flux(&FluxVector::new(&left, vec![0.3, 0.0]), &FluxVector::new(&right, vec![0.0, 0.0]));
    let tag = lattice::is_hamiltonian_endpoint(&flux, &whole).unwrap();
    assert!(!tag.is_yes());
    assert_abs_diff_eq!(tag.distance(), 0.3 * 2f64.sqrt(), epsilon = 1e-10);
}
