use contactgen::cvae::{
    checkpoint_epoch, cvae_loss, kl_divergence, reconstruction_loss, reparameterize, sample_contactgen, standard_normal_latent, train, train_model,
    Conditioning, CvaeArch, CvaeModel, DecoderOutputs, LatentGaussian, LossConfig, Target, TrainConfig, LATENT_DIM,
    METRICS_HEADER,
};
use contactgen::geometry::{primitives, sample_surface_points, Vec3};
use contactgen::hand::{default_hand, NUM_PARTS};
use contactgen::nn::PointNetConfig;
use contactgen::repr::{make_synthetic_dataset, ContactGenMaps, GraspSample, ObjectPoints, ShapeKind, ShapeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn tiny_arch(seed: u64) -> CvaeArch {
    CvaeArch {
        backbone: PointNetConfig {
            width: 0.25,
            ..PointNetConfig::default()
        },
        parts: NUM_PARTS,
        seed,
    }
}

fn sphere_points(n: usize, seed: u64) -> ObjectPoints {
    let mesh = primitives::uv_sphere(0.04, 24, 12);
    sample_surface_points(&mesh, n, seed).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn random_maps(rng: &mut ChaCha8Rng, n: usize, parts: usize) -> ContactGenMaps {
    ContactGenMaps::new(
        (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        (0..n).map(|_| rng.gen_range(0..parts)).collect(),
        (0..n).map(|_| random_unit(rng)).collect(),
        parts,
    )
    .unwrap()
}

fn grasps(count: usize, points: usize) -> Vec<GraspSample> {
    let hand = default_hand();
    let shapes = [ShapeSpec::new(ShapeKind::Sphere, 0.03, 0.04).unwrap()];
    make_synthetic_dataset(&shapes, count, 5, points, &hand).unwrap().samples
}

#[test]
fn reparameterization_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = LatentGaussian {
        mean: std::array::from_fn(|i| i as f64 * 0.1 - 0.5),
        log_var: std::array::from_fn(|i| i as f64 * 0.2 - 1.0),
    };
    assert_eq!(reparameterize(&g, &[0.0; LATENT_DIM]), g.mean);
    let noise = standard_normal_latent(&mut rng);
    assert_eq!(reparameterize(&LatentGaussian::standard(), &noise), noise);

    // Monte-Carlo mean within three standard errors
    let draws = 100_000;
    let mut sum = [0.0; LATENT_DIM];
    for _ in 0..draws {
        let z = reparameterize(&g, &standard_normal_latent(&mut rng));
        for i in 0..LATENT_DIM {
            sum[i] += z[i];
        }
    }
    for i in 0..LATENT_DIM {
        let sigma = (0.5 * g.log_var[i]).exp();
        let err = (sum[i] / draws as f64 - g.mean[i]).abs();
        assert!(err <= 3.0 * sigma / (draws as f64).sqrt(), "dim {i}: {err}");
    }
}

#[test]
fn kl_closed_form() {
    assert_eq!(kl_divergence(&LatentGaussian::standard()), 0.0);
    let mut g = LatentGaussian::standard();
    g.mean[0] = 1.0;
    assert!((kl_divergence(&g) - 0.5).abs() < 1e-15);
    // σ² = e: ½(e − 1 − 1)
    let mut g = LatentGaussian::standard();
    g.log_var[3] = 1.0;
    assert!((kl_divergence(&g) - 0.5 * (std::f64::consts::E - 2.0)).abs() < 1e-15);
}

fn outputs_from(gt: &ContactGenMaps, logit: f64) -> DecoderOutputs {
    DecoderOutputs {
        contact: gt.contact.clone(),
        part_logits: gt
            .parts
            .iter()
            .map(|&p| (0..gt.part_count).map(|k| if k == p { logit } else { 0.0 }).collect())
            .collect(),
        direction_raw: gt.directions.clone(),
    }
}

#[test]
fn perfect_reconstruction_is_the_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gt = random_maps(&mut rng, 30, 16);
    let out = outputs_from(&gt, 50.0);
    let g = [LatentGaussian::standard(); 3];
    let r = cvae_loss(&gt, &out, &g, &LossConfig::default(), 5e-2).unwrap();
    assert_eq!(r.recon.contact, 0.0);
    assert!(r.recon.direction.abs() < 1e-12);
    assert!(r.recon.part >= 0.0 && r.recon.part <= 1e-6);
    assert_eq!(r.kl, 0.0);
    assert!(r.total <= 1e-6);
}

/// Straight per-point loops over the definition.
fn oracle_loss(gt: &ContactGenMaps, out: &DecoderOutputs, g: &[LatentGaussian; 3], cfg: &LossConfig, kl_w: f64) -> f64 {
    let n = gt.contact.len();
    let mut rec = 0.0;
    for i in 0..n {
        let w = gt.contact[i] + cfg.delta;
        let l1 = (gt.contact[i] - out.contact[i]).abs();
        let logits = &out.part_logits[i];
        let mut z = 0.0;
        for l in logits {
            z += l.exp();
        }
        let ce = -(logits[gt.parts[i]].exp() / z).ln();
        let r = out.direction_raw[i];
        let len = (r.x * r.x + r.y * r.y + r.z * r.z + 1e-16).sqrt();
        let d = gt.directions[i];
        let cos = (d.x * r.x + d.y * r.y + d.z * r.z) / len;
        rec += w * (l1 + cfg.part_weight * ce + cfg.direction_weight * (1.0 - cos));
    }
    rec /= n as f64;
    let mut kl = 0.0;
    for gauss in g {
        for k in 0..LATENT_DIM {
            let (m, lv) = (gauss.mean[k], gauss.log_var[k]);
            kl += -0.5 * (1.0 + lv - m * m - lv.exp());
        }
    }
    rec + kl_w * kl
}

#[test]
fn loss_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let gt = random_maps(&mut rng, 4, 2);
        let out = DecoderOutputs {
            contact: (0..4).map(|_| rng.gen_range(0.0..1.0)).collect(),
            part_logits: (0..4).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect(),
            direction_raw: (0..4).map(|_| random_unit(&mut rng) * rng.gen_range(0.1..3.0)).collect(),
        };
        let g: [LatentGaussian; 3] = std::array::from_fn(|_| LatentGaussian {
            mean: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            log_var: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        });
        let cfg = LossConfig {
            part_weight: rng.gen_range(0.1..1.0),
            direction_weight: rng.gen_range(0.1..2.0),
            delta: rng.gen_range(0.01..1.0),
        };
        let kl_w = rng.gen_range(0.0..0.1);
        let got = cvae_loss(&gt, &out, &g, &cfg, kl_w).unwrap().total;
        let want = oracle_loss(&gt, &out, &g, &cfg, kl_w);
        assert!((got - want).abs() <= 1e-6, "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn zero_floor_ignores_points_without_contact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gt = random_maps(&mut rng, 10, 4);
    for i in 0..5 {
        gt.contact[i] = 0.0;
    }
    let cfg = LossConfig {
        delta: 1e-300,
        ..LossConfig::default()
    };
    let a = outputs_from(&gt, 2.0);
    let mut b = a.clone();
    for i in 0..5 {
        b.contact[i] = 0.9;
        b.part_logits[i] = vec![5.0, -5.0, 0.0, 1.0];
        b.direction_raw[i] = -b.direction_raw[i];
    }
    let la = reconstruction_loss(&gt, &a, &cfg).unwrap().total;
    let lb = reconstruction_loss(&gt, &b, &cfg).unwrap().total;
    assert!((la - lb).abs() < 1e-12);
}

#[test]
fn loss_rejects_mismatched_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gt = random_maps(&mut rng, 6, 3);
    let mut out = outputs_from(&gt, 1.0);
    out.contact.pop();
    assert!(reconstruction_loss(&gt, &out, &LossConfig::default()).is_err());
    let mut out = outputs_from(&gt, 1.0);
    out.part_logits[2].push(0.0);
    assert!(reconstruction_loss(&gt, &out, &LossConfig::default()).is_err());
}

#[test]
fn features_are_permutation_equivariant_and_deterministic() {
    let model = CvaeModel::new(tiny_arch(1)).unwrap();
    let object = sphere_points(512, 1);
    let f = model.extract_features(&object).unwrap();
    assert_eq!((f.len(), f.dim()), (512, model.arch().backbone.feature_dim()));
    assert!(f.is_finite());
    assert_eq!(model.extract_features(&object).unwrap(), f);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut perm: Vec<usize> = (0..512).collect();
    for i in (1..512).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let g = model.extract_features(&object.permuted(&perm)).unwrap();
    let mut worst = 0.0f64;
    for (row, &src) in perm.iter().enumerate() {
        for c in 0..f.dim() {
            worst = worst.max((g.values[[row, c]] - f.values[[src, c]]).abs());
        }
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn duplicated_points_receive_equal_features() {
    let model = CvaeModel::new(tiny_arch(2)).unwrap();
    let object = sphere_points(512, 2);
    let doubled = ObjectPoints::new(
        object.points.iter().chain(&object.points).copied().collect(),
        object.normals.iter().chain(&object.normals).copied().collect(),
        "doubled",
    )
    .unwrap();
    let f = model.extract_features(&doubled).unwrap();
    let mut worst = 0.0f64;
    for i in 0..512 {
        for c in 0..f.dim() {
            worst = worst.max((f.values[[i, c]] - f.values[[i + 512, c]]).abs());
        }
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn too_few_points_are_rejected() {
    let model = CvaeModel::new(tiny_arch(3)).unwrap();
    assert!(model.extract_features(&sphere_points(300, 3)).is_err());
}

#[test]
fn encoder_is_permutation_invariant_and_finite() {
    let model = CvaeModel::new(tiny_arch(4)).unwrap();
    let object = sphere_points(512, 4);
    let f = model.extract_features(&object).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let maps = random_maps(&mut rng, 512, NUM_PARTS);
        for target in [
            Target::Contact(&maps.contact),
            Target::Part(&maps.parts),
            Target::Direction(&maps.directions),
        ] {
            let g = model.encode(&f, target).unwrap();
            assert!(g.is_finite());
            assert_eq!((g.mean.len(), g.log_var.len()), (16, 16));
        }
    }

    let maps = random_maps(&mut rng, 512, NUM_PARTS);
    let perm: Vec<usize> = (0..512).rev().collect();
    let fp = model.extract_features(&object.permuted(&perm)).unwrap();
    let parts_p: Vec<usize> = perm.iter().map(|&i| maps.parts[i]).collect();
    let a = model.encode(&f, Target::Part(&maps.parts)).unwrap();
    let b = model.encode(&fp, Target::Part(&parts_p)).unwrap();
    for i in 0..LATENT_DIM {
        assert!((a.mean[i] - b.mean[i]).abs() <= 1e-5 && (a.log_var[i] - b.log_var[i]).abs() <= 1e-5);
    }
}

#[test]
fn encoder_rejects_bad_targets() {
    let model = CvaeModel::new(tiny_arch(5)).unwrap();
    let f = model.extract_features(&sphere_points(512, 5)).unwrap();
    assert!(model.encode(&f, Target::Contact(&[0.5; 100])).is_err());
    assert!(model.encode(&f, Target::Part(&vec![NUM_PARTS; 512])).is_err());
}

#[test]
fn decoding_is_sequential_and_valid() {
    let model = CvaeModel::new(tiny_arch(6)).unwrap();
    let object = sphere_points(512, 6);
    let f = model.extract_features(&object).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let z: [[f64; LATENT_DIM]; 3] = std::array::from_fn(|_| standard_normal_latent(&mut rng));
        let d = model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::SelfConditioned).unwrap();
        d.maps.validate().unwrap();
        assert_eq!(d.maps.len(), 512);
        assert!(d.maps.parts.iter().all(|&p| p < NUM_PARTS));
        assert!(d.maps.directions.iter().all(|v| (v.norm() - 1.0).abs() < 1e-9));
        let again = model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::SelfConditioned).unwrap();
        assert_eq!(again, d);

        // the direction code cannot reach contact or parts
        let mut z_d = z[2];
        for v in &mut z_d {
            *v += 3.0;
        }
        let moved = model.decode_sequential(&f, &z[0], &z[1], &z_d, Conditioning::SelfConditioned).unwrap();
        assert_eq!(moved.outputs.contact, d.outputs.contact);
        assert_eq!(moved.outputs.part_logits, d.outputs.part_logits);
        assert_ne!(moved.outputs.direction_raw, d.outputs.direction_raw);
        // nor can the part code reach contact
        let moved = model.decode_sequential(&f, &z[0], &z_d, &z[2], Conditioning::SelfConditioned).unwrap();
        assert_eq!(moved.outputs.contact, d.outputs.contact);
    }
}

#[test]
fn teacher_forcing_feeds_the_given_maps() {
    let model = CvaeModel::new(tiny_arch(7)).unwrap();
    let object = sphere_points(512, 7);
    let f = model.extract_features(&object).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let z: [[f64; LATENT_DIM]; 3] = std::array::from_fn(|_| standard_normal_latent(&mut rng));
    let gt = random_maps(&mut rng, 512, NUM_PARTS);
    let a = model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::TeacherForced(&gt)).unwrap();

    // nudging the conditioning contact moves the part logits
    let h = 1e-4;
    let mut nudged = gt.clone();
    for c in &mut nudged.contact {
        *c = (*c + h).min(1.0);
    }
    let b = model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::TeacherForced(&nudged)).unwrap();
    let change: f64 = a
        .outputs
        .part_logits
        .iter()
        .zip(&b.outputs.part_logits)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .sum();
    assert!(change > 0.0);
    assert_eq!(a.outputs.contact, b.outputs.contact);

    // a different conditioning part map changes the directions only
    let mut relabeled = gt.clone();
    for p in &mut relabeled.parts {
        *p = (*p + 1) % NUM_PARTS;
    }
    let c = model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::TeacherForced(&relabeled)).unwrap();
    assert_eq!(c.outputs.part_logits, a.outputs.part_logits);
    assert_ne!(c.outputs.direction_raw, a.outputs.direction_raw);

    let short = random_maps(&mut rng, 10, NUM_PARTS);
    assert!(model.decode_sequential(&f, &z[0], &z[1], &z[2], Conditioning::TeacherForced(&short)).is_err());
}

#[test]
fn prior_sampling_varies_with_the_seed() {
    let model = CvaeModel::new(tiny_arch(8)).unwrap();
    let object = sphere_points(512, 8);
    let a = sample_contactgen(&object, &model, 1).unwrap();
    let b = sample_contactgen(&object, &model, 2).unwrap();
    a.validate().unwrap();
    b.validate().unwrap();
    assert_eq!(sample_contactgen(&object, &model, 1).unwrap(), a);
    let hamming = a.parts.iter().zip(&b.parts).filter(|(x, y)| x != y).count();
    assert!(hamming > 0);

    // fixing the contact code fixes the contact map while parts still vary
    let f = model.extract_features(&object).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let z_c = standard_normal_latent(&mut rng);
    let first = model
        .decode_sequential(&f, &z_c, &standard_normal_latent(&mut rng), &standard_normal_latent(&mut rng), Conditioning::SelfConditioned)
        .unwrap();
    let mut varied = false;
    for _ in 0..5 {
        let other = model
            .decode_sequential(&f, &z_c, &standard_normal_latent(&mut rng), &standard_normal_latent(&mut rng), Conditioning::SelfConditioned)
            .unwrap();
        assert_eq!(other.maps.contact, first.maps.contact);
        varied |= other.maps.parts != first.maps.parts;
    }
    assert!(varied);
}

#[test]
fn gradient_matches_central_differences() {
    let mut model = CvaeModel::new(tiny_arch(9)).unwrap();
    let sample = &grasps(1, 512)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise: [[f64; LATENT_DIM]; 3] = std::array::from_fn(|_| standard_normal_latent(&mut rng));
    let cfg = LossConfig::default();
    let (_, grad) = model.loss_and_gradient(&sample.object, &sample.maps, &noise, &cfg, 5e-2).unwrap();
    let flat = model.params().to_flat();

    let names = model.params().names().to_vec();
    let sizes: Vec<usize> = model.params().tensors().iter().map(|t| t.len()).collect();
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, s| { let o = *acc; *acc += s; Some(o) }).collect();
    let h = 1e-6;
    for name in ["dec_contact.2.weight", "dec_part.1.weight", "dec_direction.0.bias", "enc_part.head.1.weight", "part_embedding", "backbone.fp1.1.weight", "backbone.sa2.0.weight"] {
        let k = names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no tensor {name}"));
        let dir: Vec<f64> = (0..sizes[k]).map(|_| rng.sample(StandardNormal)).collect();
        let analytic: f64 = dir.iter().enumerate().map(|(j, d)| d * grad[offsets[k] + j]).sum();
        let mut eval = |sign: f64| {
            let mut p = flat.clone();
            for (j, d) in dir.iter().enumerate() {
                p[offsets[k] + j] += sign * h * d;
            }
            model.params_mut().set_flat(&p);
            model.loss_and_gradient(&sample.object, &sample.maps, &noise, &cfg, 5e-2).unwrap().0.total
        };
        let fd = (eval(1.0) - eval(-1.0)) / (2.0 * h);
        model.params_mut().set_flat(&flat);
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-12);
        assert!(rel <= 1e-4, "{name}: fd {fd} analytic {analytic}");
    }
}

#[test]
fn kl_weight_ramps_over_the_first_half() {
    let cfg = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.kl_weight(0), 0.0);
    assert!((cfg.kl_weight(75) - 2.5e-2).abs() < 1e-15);
    assert!((cfg.kl_weight(150) - 5e-2).abs() < 1e-15);
    assert_eq!(cfg.kl_weight(299), 5e-2);
}

#[test]
fn training_is_deterministic_and_checkpoints_roundtrip() {
    let hand = default_hand();
    let data = grasps(2, 512);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        checkpoint_every: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        metrics_csv: Some(dir.path().join("metrics.csv")),
        seed: 3,
        ..TrainConfig::default()
    };
    let (model, report) = train(&data, &hand, tiny_arch(10), &cfg).unwrap();
    assert_eq!(report.epochs.len(), 2);
    assert!(report.epochs.iter().all(|e| e.recon.is_finite() && e.kl >= 0.0));
    assert_eq!(report.checkpoints.len(), 3);

    let plain = TrainConfig {
        checkpoint_dir: None,
        metrics_csv: None,
        ..cfg.clone()
    };
    let (again, report2) = train(&data, &hand, tiny_arch(10), &plain).unwrap();
    assert_eq!(report.epochs, report2.epochs);
    assert_eq!(again.params(), model.params());

    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), METRICS_HEADER);
    assert_eq!(lines.count(), 2);

    let (loaded, echo) = CvaeModel::load(dir.path().join("final.cgcvae")).unwrap();
    assert_eq!(loaded.params(), model.params());
    assert_eq!(loaded.arch(), model.arch());
    assert!(echo.contains("learning_rate"));
    assert_eq!(checkpoint_epoch(&echo), Some(2));
    let (_, first) = CvaeModel::load(dir.path().join("epoch-00001.cgcvae")).unwrap();
    assert_eq!(checkpoint_epoch(&first), Some(1));
    let object = &data[0].object;
    assert_eq!(sample_contactgen(object, &loaded, 4).unwrap(), sample_contactgen(object, &model, 4).unwrap());

    let mut bytes = std::fs::read(dir.path().join("final.cgcvae")).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(dir.path().join("broken.cgcvae"), bytes).unwrap();
    assert!(CvaeModel::load(dir.path().join("broken.cgcvae")).is_err());
}

#[test]
fn resumed_training_continues_the_epoch_counter() {
    let hand = default_hand();
    let data = grasps(2, 512);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        checkpoint_every: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        metrics_csv: Some(dir.path().join("metrics.csv")),
        ..TrainConfig::default()
    };
    let (_, first) = train(&data, &hand, tiny_arch(12), &cfg).unwrap();
    let (model, echo) = CvaeModel::load(dir.path().join("final.cgcvae")).unwrap();
    let resume = TrainConfig {
        epochs: 4,
        start_epoch: checkpoint_epoch(&echo).unwrap(),
        ..cfg.clone()
    };
    let (_, second) = train_model(model, &data, &hand, &resume).unwrap();
    assert_eq!(second.epochs.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![2, 3]);
    assert_eq!(second.epochs[0].kl_weight, resume.kl_weight(2));
    assert!(dir.path().join("epoch-00004.cgcvae").exists());
    let last = first.epochs.last().unwrap().recon;
    assert!((second.epochs[0].recon - last).abs() < 0.5 * last, "{last} -> {}", second.epochs[0].recon);

    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let epochs: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["0", "1", "2", "3"]);

    let (model, _) = CvaeModel::load(dir.path().join("final.cgcvae")).unwrap();
    let past = TrainConfig { start_epoch: 5, ..resume };
    assert!(train_model(model, &data, &hand, &past).is_err());
}

#[test]
fn divergence_aborts_with_the_last_good_model() {
    let hand = default_hand();
    let data = grasps(1, 512);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        learning_rate: 1e150,
        checkpoint_every: 0,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..TrainConfig::default()
    };
    let err = train(&data, &hand, tiny_arch(11), &cfg).unwrap_err();
    assert!(matches!(err, contactgen::Error::Diverged { .. }), "{err}");
    let (model, _) = CvaeModel::load(dir.path().join("last_good.cgcvae")).unwrap();
    assert!(model.params().to_flat().iter().all(|v| v.is_finite()));
}

#[test]
fn training_input_validation() {
    let hand = default_hand();
    assert!(train(&[], &hand, tiny_arch(12), &TrainConfig::default()).is_err());
    let data = grasps(1, 512);
    for cfg in [
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            loss: LossConfig {
                delta: 1.5,
                ..LossConfig::default()
            },
            ..TrainConfig::default()
        },
    ] {
        assert!(train(&data, &hand, tiny_arch(12), &cfg).is_err());
    }
}
