use contactgen::eval::{
    diversity_metrics, f_score, format_table, kmeans, mesh_metrics, nearest_distances, pck_auc, physical_metrics,
    simulation_displacement, vertex_error, write_report_csv, write_summary_csv, EvalRow, GraspSetReport, MeshMetricReport,
    MockEngine, PhysicsProbe, ProcessEngine, SimulationConfig, SimulationEngine, CONTACT_THRESHOLD, PENETRATION_VOXEL,
    UNAVAILABLE,
};
use contactgen::geometry::{primitives, RigidTransform, TriangleMesh, Vec3};
use contactgen::hand::default_hand;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hand_mesh() -> TriangleMesh {
    let hand = default_hand();
    hand.pose(&contactgen::hand::HandParams::rest()).template_mesh()
}

fn jittered(mesh: &TriangleMesh, rng: &mut ChaCha8Rng, scale: f64) -> TriangleMesh {
    let mut m = mesh.clone();
    for v in &mut m.vertices {
        *v += Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
    }
    m
}

fn shifted(mesh: &TriangleMesh, by: Vec3) -> TriangleMesh {
    mesh.transformed(&RigidTransform::from_translation(by))
}

#[test]
fn identical_meshes_score_perfectly() {
    let m = hand_mesh();
    let r = mesh_metrics(&m, &m).unwrap();
    assert_eq!(
        r,
        MeshMetricReport {
            epe_cm: 0.0,
            auc: 1.0,
            f_5mm: 1.0,
            f_15mm: 1.0
        }
    );
}

/// Exhaustive pairwise F-score.
fn oracle_f(pred: &[Vec3], gt: &[Vec3], t: f64) -> f64 {
    let within = |from: &[Vec3], to: &[Vec3]| {
        from.iter()
            .filter(|p| to.iter().map(|q| (*p - q).norm()).fold(f64::INFINITY, f64::min) <= t)
            .count() as f64
            / from.len() as f64
    };
    let (p, r) = (within(pred, gt), within(gt, pred));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[test]
fn translated_mesh_has_exact_error_and_oracle_f_score() {
    let gt = hand_mesh();
    let pred = shifted(&gt, Vec3::new(0.003, 0.0, 0.004));
    let epe = mesh_metrics(&pred, &gt).unwrap().epe_cm;
    assert!((epe - 0.5).abs() < 1e-9, "{epe}");
    assert!((vertex_error(&pred, &gt).unwrap() - 0.005).abs() < 1e-12);
    for t in [0.002, 0.0045, 0.015] {
        let f = f_score(&pred, &gt, t);
        assert!((f - oracle_f(&pred.vertices, &gt.vertices, t)).abs() < 1e-12);
    }
    // just inside the 5 mm threshold every vertex finds its counterpart
    let near = shifted(&gt, Vec3::new(0.0, 0.0049, 0.0));
    assert_eq!(f_score(&near, &gt, 0.005), 1.0);
    assert_eq!(oracle_f(&near.vertices, &gt.vertices, 0.005), 1.0);
    let d = nearest_distances(&pred.vertices, &gt.vertices);
    assert!(d.iter().all(|&x| x <= 0.005 + 1e-12));
}

#[test]
fn auc_matches_threshold_average() {
    let gt = hand_mesh();
    let pred = shifted(&gt, Vec3::new(0.0, 0.0, 0.0207));
    // every vertex is 2.07 cm off: correct for thresholds 2.1 cm and up, 59 of 100
    assert!((pck_auc(&pred, &gt).unwrap() - 0.59).abs() < 1e-12);
    let far = shifted(&gt, Vec3::new(0.0, 0.0, 0.06));
    assert_eq!(pck_auc(&far, &gt).unwrap(), 0.0);
}

#[test]
fn vertex_error_is_a_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let base = hand_mesh();
    let a = jittered(&base, &mut rng, 0.01);
    let b = jittered(&base, &mut rng, 0.01);
    let c = jittered(&base, &mut rng, 0.01);
    assert_eq!(vertex_error(&a, &a).unwrap(), 0.0);
    assert!((vertex_error(&a, &b).unwrap() - vertex_error(&b, &a).unwrap()).abs() < 1e-12);
    assert!(vertex_error(&a, &c).unwrap() <= vertex_error(&a, &b).unwrap() + vertex_error(&b, &c).unwrap() + 1e-9);
    let other = primitives::uv_sphere(0.05, 8, 4);
    assert!(vertex_error(&other, &a).is_err());
    assert!(mesh_metrics(&other, &a).is_err());
}

#[test]
fn f_score_is_monotone_in_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gt = hand_mesh();
    for _ in 0..5 {
        let pred = jittered(&gt, &mut rng, 0.02);
        let mut last = 0.0;
        for k in 1..=20 {
            let f = f_score(&pred, &gt, k as f64 * 0.001);
            assert!(f >= last);
            last = f;
        }
        let r = mesh_metrics(&pred, &gt).unwrap();
        assert!(r.f_15mm >= r.f_5mm);
        assert!(r.epe_cm >= 0.0 && (0.0..=1.0).contains(&r.auc));
    }
}

fn cube(edge: f64, center: Vec3) -> TriangleMesh {
    shifted(&primitives::cuboid(Vec3::repeat(edge)), center)
}

#[test]
fn disjoint_hands_neither_penetrate_nor_touch() {
    let object = cube(0.02, Vec3::zeros());
    let hands = vec![cube(0.02, Vec3::new(0.025, 0.0, 0.0)), cube(0.01, Vec3::new(0.0, 0.0, -0.03))];
    let m = physical_metrics(&hands, &object, CONTACT_THRESHOLD).unwrap();
    assert_eq!(m.penetration_cm3, 0.0);
    assert_eq!(m.contact_ratio, 0.0);
    assert!(physical_metrics(&[], &object, CONTACT_THRESHOLD).is_err());
}

#[test]
fn embedded_overlap_cube_has_unit_volume() {
    let object = cube(0.02, Vec3::zeros());
    let hand = cube(0.02, Vec3::new(0.01, 0.01, 0.01));
    let probe = PhysicsProbe::new(&object, PENETRATION_VOXEL, CONTACT_THRESHOLD).unwrap();
    let g = probe.measure(&hand).unwrap();
    assert!((g.penetration_cm3 - 1.0).abs() <= 0.05, "{}", g.penetration_cm3);
    assert!(g.in_contact && g.min_distance == 0.0);

    // a common rigid motion changes the volume by at most the voxel error
    let w = RigidTransform::from_axis_angle(&Vec3::new(0.3, -0.5, 0.8), Vec3::new(0.004, -0.002, 0.001));
    let probe = PhysicsProbe::new(&object.transformed(&w), PENETRATION_VOXEL, CONTACT_THRESHOLD).unwrap();
    let moved = probe.measure(&hand.transformed(&w)).unwrap().penetration_cm3;
    assert!((moved - g.penetration_cm3).abs() <= 0.05 * g.penetration_cm3, "{moved}");
}

#[test]
fn contact_ratio_counts_hands_within_threshold() {
    let object = cube(0.02, Vec3::zeros());
    let near = cube(0.01, Vec3::new(0.0161, 0.0, 0.0));
    let far = cube(0.01, Vec3::new(0.03, 0.0, 0.0));
    let m = physical_metrics(&[near, far], &object, CONTACT_THRESHOLD).unwrap();
    assert_eq!(m.penetration_cm3, 0.0);
    assert_eq!(m.contact_ratio, 0.5);
}

fn clustered(rng: &mut ChaCha8Rng, clusters: usize, per: usize, spread: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for c in 0..clusters {
        for _ in 0..per {
            out.push((0..6).map(|d| if d == c % 6 { (c / 6 + 1) as f64 * 10.0 } else { 0.0 } + rng.gen_range(-spread..spread)).collect());
        }
    }
    out
}

#[test]
fn separated_equal_clusters_have_maximal_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grasps = clustered(&mut rng, 20, 5, 0.1);
    let m = diversity_metrics(&grasps, 20, 50, 0).unwrap();
    assert!((m.entropy - 20f64.ln()).abs() <= 0.01, "{}", m.entropy);
    assert!(m.cluster_size > 0.0 && m.cluster_size < 0.2);
}

#[test]
fn identical_grasps_have_no_diversity() {
    let grasps = vec![vec![0.1, -0.2, 0.3]; 25];
    let m = diversity_metrics(&grasps, 20, 50, 0).unwrap();
    assert_eq!(m.entropy, 0.0);
    assert!(m.cluster_size.abs() < 1e-12);
}

#[test]
fn cluster_size_is_mean_distance_to_centroid() {
    // two clusters: {±1 around 0} and {±2 around 100} on one axis
    let grasps = vec![vec![-1.0], vec![1.0], vec![98.0], vec![102.0]];
    let m = diversity_metrics(&grasps, 2, 10, 0).unwrap();
    assert!((m.cluster_size - 1.5).abs() < 1e-12);
    assert!((m.entropy - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn entropy_is_bounded_and_ignores_labels_and_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grasps: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let m = diversity_metrics(&grasps, 20, 10, 1).unwrap();
    assert!(m.entropy >= 0.0 && m.entropy <= 20f64.ln() + 1e-12);

    let c = kmeans(&grasps, 5, 5, 2).unwrap();
    let counts = |assign: &[usize]| {
        let mut k = vec![0usize; 5];
        for &a in assign {
            k[a] += 1;
        }
        let mut k: Vec<usize> = k.into_iter().filter(|&x| x > 0).collect();
        k.sort_unstable();
        k
    };
    // relabeling clusters leaves the count profile and hence the entropy alone
    let relabeled: Vec<usize> = c.assignment.iter().map(|&a| (a + 3) % 5).collect();
    assert_eq!(counts(&relabeled), counts(&c.assignment));

    let separated = clustered(&mut rng, 20, 5, 0.1);
    let mut reversed = separated.clone();
    reversed.reverse();
    let a = diversity_metrics(&separated, 20, 50, 0).unwrap();
    let b = diversity_metrics(&reversed, 20, 50, 0).unwrap();
    assert!((a.entropy - b.entropy).abs() < 1e-12);
}

#[test]
fn kmeans_input_validation() {
    let few = vec![vec![0.0]; 5];
    assert!(diversity_metrics(&few, 20, 50, 0).is_err());
    assert!(kmeans(&[vec![0.0], vec![0.0, 1.0]], 1, 1, 0).is_err());
    assert!(kmeans(&[vec![f64::NAN]], 1, 1, 0).is_err());
    assert!(kmeans(&[vec![0.0]], 0, 1, 0).is_err());
}

#[test]
fn simulation_is_unavailable_without_an_engine() {
    let m = cube(0.02, Vec3::zeros());
    let r = simulation_displacement(&m, &m, None, &SimulationConfig::default()).unwrap();
    assert_eq!(r, None);
}

#[test]
fn mock_engine_passes_its_path_through() {
    let m = cube(0.02, Vec3::zeros());
    let mock = MockEngine {
        start: Vec3::new(0.0, 0.0, 0.1),
        end: Vec3::new(0.03, 0.0, 0.06),
    };
    let engine: &dyn SimulationEngine = &mock;
    let r = simulation_displacement(&m, &m, Some(engine), &SimulationConfig::default()).unwrap();
    assert!((r.unwrap() - 5.0).abs() < 1e-12);
}

#[cfg(unix)]
fn script(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[cfg(unix)]
#[test]
fn process_engine_speaks_the_line_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("received.txt");
    let body = format!(
        "cat > {}\necho 'loading'\necho 'start 0 0 0.1'\necho 'end 0 0.03 0.06'",
        log.display()
    );
    let engine = ProcessEngine::new(script(dir.path(), "engine.sh", &body), dir.path().join("work"));
    let m = cube(0.02, Vec3::zeros());
    let r = simulation_displacement(&m, &m, Some(&engine), &SimulationConfig::default()).unwrap();
    assert!((r.unwrap() - 5.0).abs() < 1e-9);
    let sent = std::fs::read_to_string(log).unwrap();
    let keys: Vec<&str> = sent.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(keys, ["hand", "object", "horizon", "gravity", "friction", "density", "run"]);
    assert!(sent.contains("horizon 1\n"));

    let failing = ProcessEngine::new(script(dir.path(), "bad.sh", "cat > /dev/null\necho 'error no solver'"), dir.path());
    assert!(simulation_displacement(&m, &m, Some(&failing), &SimulationConfig::default()).is_err());
    let silent = ProcessEngine::new(script(dir.path(), "silent.sh", "cat > /dev/null"), dir.path());
    assert!(simulation_displacement(&m, &m, Some(&silent), &SimulationConfig::default()).is_err());
    let missing = ProcessEngine::new(dir.path().join("does-not-exist"), dir.path());
    assert!(simulation_displacement(&m, &m, Some(&missing), &SimulationConfig::default()).is_err());
}

#[test]
fn reports_mark_missing_values_unavailable() {
    let rows = vec![
        EvalRow {
            sample: "a".into(),
            failed: false,
            mesh: Some(MeshMetricReport {
                epe_cm: 1.0,
                auc: 0.8,
                f_5mm: 0.5,
                f_15mm: 0.9,
            }),
            penetration_cm3: 2.0,
            in_contact: true,
            simulation_cm: None,
        },
        EvalRow {
            sample: "b".into(),
            failed: true,
            mesh: None,
            penetration_cm3: 0.0,
            in_contact: false,
            simulation_cm: None,
        },
    ];
    let mut summary = GraspSetReport::from_rows(&rows);
    assert_eq!(summary.penetration_cm3, 1.0);
    assert_eq!(summary.contact_ratio, 0.5);
    assert_eq!(summary.simulation_cm, None);
    summary.entropy = Some(1.5);

    let dir = tempfile::tempdir().unwrap();
    write_report_csv(&rows, dir.path().join("r.csv")).unwrap();
    write_summary_csv(&summary, dir.path().join("s.csv")).unwrap();
    let r = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = r.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    assert!(lines[1].ends_with(UNAVAILABLE));
    assert!(lines[2].starts_with("b,failed,unavailable"));
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(s.contains("simulation_cm,unavailable"));
    assert!(s.contains("entropy,1.5"));
    assert!(s.contains("cluster_size,unavailable"));
    let no_gt: Vec<EvalRow> = rows.iter().cloned().map(|r| EvalRow { mesh: None, ..r }).collect();
    write_report_csv(&no_gt, dir.path().join("n.csv")).unwrap();
    let n = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert_eq!(n.lines().next().unwrap(), "sample,status,penetration_cm3,in_contact,simulation_cm");
    assert!(n.lines().all(|l| l.split(',').count() == 5));
    let table = format_table(&rows, &summary);
    assert!(table.contains(UNAVAILABLE));
    assert_eq!(table.lines().filter(|l| l.starts_with("a ") || l.starts_with("b ")).count(), 2);

    let with_sim: Vec<EvalRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.simulation_cm = Some(3.0);
            r
        })
        .collect();
    assert_eq!(GraspSetReport::from_rows(&with_sim).simulation_cm, Some(3.0));
}
