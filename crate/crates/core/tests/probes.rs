use sympflux::hamiltonian::Hamiltonian;
use sympflux::probes::{self, Disc};
use sympflux::splitting::{BaseNorm, SeminormSpec, SplittingOperator};
use sympflux::{DiffeoMap, IsotopyPath, OneFormField, Schedule, TorusModel};

fn disc() -> Disc {
    Disc { center: vec![0.5, 0.5], radius: 0.4 }
}

#[test]
fn rank_of_pullbacks_of_dy() {
    let m = TorusModel::standard(1, 64).unwrap();
    let dy = OneFormField::constant(&m, &[0.0, 1.0]);
    let r = probes::pullback_independence_rank(&dy, 8, &disc(), 0.004).unwrap();
    for s in &r.steps {
        assert_eq!(s.rank, s.k, "{:?}", r.steps);
        assert!(s.min_singular > 1e-8);
    }
}

#[test]
fn rank_of_pullbacks_of_exact_form() {
    let m = TorusModel::standard(1, 64).unwrap();
    let beta = Hamiltonian::mode(1.0 / (2.0 * std::f64::consts::PI), &[1, 0]).form(&m);
    let r = probes::pullback_independence_rank(&beta, 5, &disc(), 0.004).unwrap();
    assert_eq!(r.rank(), 5);
}

#[test]
fn identity_alone_has_rank_one() {
    let m = TorusModel::standard(1, 32).unwrap();
    let dy = OneFormField::constant(&m, &[0.0, 1.0]);
    let r = probes::pullback_independence_rank(&dy, 1, &disc(), 0.004).unwrap();
    assert_eq!(r.rank(), 1);
}

#[test]
fn vanishing_beta_is_degenerate() {
    let m = TorusModel::standard(1, 32).unwrap();
    let zero = OneFormField::zero(&m);
    assert!(probes::pullback_independence_rank(&zero, 3, &disc(), 0.004).is_err());
}

#[test]
fn nonharmonic_certificate_for_dx() {
    let m = TorusModel::standard(1, 64).unwrap();
    let dx = OneFormField::constant(&m, &[1.0, 0.0]);
    let metrics = probes::sample_metrics(&m, 10, 10, 11);
    let r = probes::construct_nonharmonic_closed_form(&dx, &disc(), 0.15, 0.1, &metrics).unwrap();
    assert_eq!(r.certificates.len(), 21);
    for c in &r.certificates {
        assert!(c.certificate > 0.0 && c.codiff_norm > 0.0, "{c:?}");
        assert!(c.ibp_residual <= 1e-8, "{c:?}");
        assert!(c.codiff_norm >= c.certificate / c.f_norm * (1.0 - 1e-9));
        assert!((c.certificate - c.local_energy).abs() <= 1e-6 * c.local_energy, "{c:?}");
    }
    assert!((r.harmonic_part[0] - 1.0).abs() < 1e-12 && r.harmonic_part[1].abs() < 1e-12);
}

#[test]
fn nonharmonic_rejects_zero_bump_and_exact_alpha() {
    let m = TorusModel::standard(1, 32).unwrap();
    let dx = OneFormField::constant(&m, &[1.0, 0.0]);
    let metrics = probes::sample_metrics(&m, 1, 1, 1);
    assert!(probes::construct_nonharmonic_closed_form(&dx, &disc(), 0.15, 0.0, &metrics).is_err());
    let exact = Hamiltonian::mode(0.1, &[1, 1]).form(&m);
    assert!(probes::construct_nonharmonic_closed_form(&exact, &disc(), 0.15, 0.1, &metrics).is_err());
}

#[test]
fn right_concat_excess_of_shear() {
    let m = TorusModel::standard(1, 64).unwrap();
    let h = Hamiltonian::mode(0.2, &[1, 0]);
    let phi = IsotopyPath::constant(&m, 64, &h.form(&m)).unwrap();
    let r = probes::nonminimizing_right_concat_demo(&phi, &[0.0, 1.0], Schedule::default()).unwrap();
    let expected = 0.8 * std::f64::consts::PI;
    assert!((r.predicted - expected).abs() < 1e-6, "{r:?}");
    assert!((r.right_excess - r.predicted).abs() < 1e-4, "{r:?}");
    assert!(r.left_excess.abs() < 1e-6, "{r:?}");
    let null = IsotopyPath::null(&m, 64);
    assert!(probes::nonminimizing_right_concat_demo(&null, &[0.0, 1.0], Schedule::default()).is_err());
    let control = probes::right_concat_excess(&null, &[0.0, 1.0], Schedule::default()).unwrap();
    assert!(control.right_excess.abs() <= 1e-8, "{control:?}");
}

#[test]
fn dagger_hodge_violated_and_translation_equivariant_pullback_diff() {
    let m = TorusModel::standard(1, 64).unwrap();
    let forms = probes::dagger_forms(&m, 3);
    let maps = probes::dagger_maps(&m, 3, false).unwrap();
    assert!(maps.len() * forms.len() >= 100);
    let r = probes::dagger_defect(&SeminormSpec::hodge(1.0, BaseNorm::HoferOsc), &maps, &forms).unwrap();
    assert!(r.violates_dagger);
    assert!(r.sampled_ratios.iter().any(|x| (x - 1.0).abs() > 1e-3));

    let f = DiffeoMap::translation(&m, &[0.13, 0.29]);
    let spec = SeminormSpec::new(SplittingOperator::pullback_diff(f), 1.0, BaseNorm::HoferOsc).unwrap();
    let trans = probes::dagger_maps(&m, 4, true).unwrap();
    let r = probes::dagger_defect(&spec, &trans, &forms).unwrap();
    for x in &r.sampled_ratios {
        assert!((x - 1.0).abs() <= 1e-8, "{x}");
    }
}
