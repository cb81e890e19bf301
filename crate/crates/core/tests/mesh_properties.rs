use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stfosls::mesh::{FacetTag, MarkSet, Mesh};
use stfosls::verify::random_nvb_trial;

#[test]
fn random_refinement_trials() {
    let mut rng = StdRng::seed_from_u64(11);
    for trial in 0..100 {
        if let Err(msg) = random_nvb_trial(&mut rng, 5).unwrap() {
            panic!("trial {trial}: {msg}");
        }
    }
}

#[test]
fn refined_meshes_keep_boundary_tags_and_round_trip() {
    let mut rng = StdRng::seed_from_u64(5);
    let mut mesh = Mesh::uniform(2.0, (-1.0, 1.0), 2, 3).unwrap();
    for _ in 0..8 {
        let marks = MarkSet::new(
            (0..mesh.num_elements())
                .filter(|_| rng.gen_bool(0.3))
                .collect(),
        );
        mesh = mesh.refine(&marks).unwrap().mesh;
        for k in 0..mesh.num_elements() {
            for e in 0..3 {
                let [a, b] = mesh.edge_vertices(k, e);
                let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
                let expected = if pa.t == 0.0 && pb.t == 0.0 {
                    FacetTag::Initial
                } else if pa.t == 2.0 && pb.t == 2.0 {
                    FacetTag::Final
                } else if (pa.x == -1.0 && pb.x == -1.0) || (pa.x == 1.0 && pb.x == 1.0) {
                    FacetTag::LateralDirichlet
                } else {
                    FacetTag::Interior
                };
                assert_eq!(mesh.facet_tags(k)[e], expected);
            }
        }
        assert!(mesh.is_conforming());
        let area: f64 = (0..mesh.num_elements())
            .map(|k| mesh.element_measure(k))
            .sum();
        assert!((area - 4.0).abs() < 1e-12);
    }
    assert_eq!(Mesh::from_dump(&mesh.to_dump()).unwrap(), mesh);
}

#[test]
fn uniform_refinement_halves_diameter() {
    let mut mesh = Mesh::uniform(1.0, (0.0, 1.0), 3, 2).unwrap();
    for _ in 0..3 {
        let fine = mesh.refine_uniform().unwrap();
        assert_eq!(fine.num_elements(), 4 * mesh.num_elements());
        assert!((fine.max_diameter() - 0.5 * mesh.max_diameter()).abs() < 1e-12);
        mesh = fine;
    }
}
