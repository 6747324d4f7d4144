use rand::Rng;
use wom_polar::codec::count_wom_violations;
use wom_polar::harness::TrialSetup;
use wom_polar::polar::polar_transform;
use wom_polar::rng;
use wom_polar::{apply_write, construct, decode, encode, run_experiment, FreezeBits, ReadChannel, WomSourceModel};

#[test]
fn noiseless_roundtrip_and_invariants() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let ch = ReadChannel::identity();
    for n in [64usize, 256] {
        let c = construct(&model, &ch, n, 5_000, 1, 0.9, 0.1).unwrap();
        let p = &c.partition;
        let freeze = FreezeBits::for_partition(p);
        let message_set = p.message_set();
        let mut clean = 0;
        for t in 0..200u64 {
            let mut rng = rng::stream(31, t);
            let (s, _) = model.sample_block(n, &mut rng);
            let message: Vec<u8> = (0..p.message_len()).map(|_| rng.gen_range(0..=1u8)).collect();
            let r = encode(&s, p, &message, &freeze, &model, &mut rng).unwrap();

            assert_eq!(polar_transform(&r.codeword), r.u_vector);
            assert_eq!(r.wom_violations, count_wom_violations(&s, &r.codeword));
            let placed: Vec<u8> = message_set.iter().map(|&i| r.u_vector.as_slice()[i - 1]).collect();
            assert_eq!(placed, message);

            if r.wom_violations == 0 {
                clean += 1;
                let stored = apply_write(&s, &r.codeword).unwrap();
                assert_eq!(stored, r.codeword);
                let y: Vec<usize> = stored.as_slice().iter().map(|&b| usize::from(b)).collect();
                assert_eq!(decode(&y, p, &freeze, &model, &ch).unwrap(), message);
            }
        }
        assert!(clean > 0);
    }
}

#[test]
fn pure_noise_read_gives_coin_flip_bits() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let design = ReadChannel::bsc(0.02).unwrap();
    let c = construct(&model, &design, 256, 5_000, 1, 0.99, 0.01).unwrap();
    assert!(c.partition.message_len() > 0);
    let noise = ReadChannel::bsc(0.5).unwrap();
    let freeze = FreezeBits::for_partition(&c.partition);
    let setup = TrialSetup {
        model: &model,
        channel: &noise,
        partition: &c.partition,
        freeze: &freeze,
    };
    let report = run_experiment(&setup, 400, 8, serde_json::Value::Null).unwrap();
    assert!((report.bit_error_rate - 0.5).abs() < 0.05, "BER {}", report.bit_error_rate);
}

#[test]
fn experiment_reports_are_reproducible() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let ch = ReadChannel::bsc(0.02).unwrap();
    let c = construct(&model, &ch, 128, 2_000, 4, 0.99, 0.01).unwrap();
    let freeze = FreezeBits::for_partition(&c.partition);
    let setup = TrialSetup {
        model: &model,
        channel: &ch,
        partition: &c.partition,
        freeze: &freeze,
    };
    let a = run_experiment(&setup, 64, 3, serde_json::json!({"tag": 1})).unwrap();
    let b = run_experiment(&setup, 64, 3, serde_json::json!({"tag": 1})).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.frame_error_rate.ci_low <= a.frame_error_rate.rate);
    assert!(a.frame_error_rate.rate <= a.frame_error_rate.ci_high);
}

#[test]
fn fer_grows_with_crossover_at_fixed_design() {
    let model = WomSourceModel::new(0.5, 0.5).unwrap();
    let design = ReadChannel::bsc(0.02).unwrap();
    let c = construct(&model, &design, 256, 5_000, 1, 0.99, 0.01).unwrap();
    let freeze = FreezeBits::for_partition(&c.partition);
    let fers: Vec<f64> = [0.0, 0.01, 0.02, 0.05]
        .iter()
        .map(|&p| {
            let ch = ReadChannel::bsc(p).unwrap();
            let setup = TrialSetup {
                model: &model,
                channel: &ch,
                partition: &c.partition,
                freeze: &freeze,
            };
            run_experiment(&setup, 300, 6, serde_json::Value::Null)
                .unwrap()
                .frame_error_rate
                .rate
        })
        .collect();
    // Common random numbers across points; allow one trial of slack.
    for w in fers.windows(2) {
        assert!(w[1] + 1.0 / 300.0 >= w[0], "{fers:?}");
    }
}
