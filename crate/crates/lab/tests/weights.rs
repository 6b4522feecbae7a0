use calf_core::env::{Environment, Pendulum};
use calf_core::policy::{ActionTransform, Activation, OutputRole, PortableNetwork};
use calf_core::seed;
use calf_lab::weights::{
    load_portable_weights, load_weights_file, parse_weights, save_portable_weights,
    save_weights_file, verify_probes, WeightsError, WeightsFile, PROBE_TOLERANCE,
};
use proptest::prelude::*;

fn policy_net(seed: u64, hidden: &[usize], transform: ActionTransform) -> PortableNetwork {
    PortableNetwork::mlp(
        3,
        hidden,
        Activation::Tanh,
        1,
        Activation::Tanh,
        1.0,
        OutputRole::PolicyMean,
        (vec![-2.0], vec![2.0]),
        transform,
        &mut seed::stream(seed, 0),
    )
    .unwrap()
}

fn sample_json() -> String {
    let net = policy_net(1, &[4], ActionTransform::Scale);
    serde_json::to_string(&WeightsFile::from_network(&net)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn save_load_is_bit_exact(seed in any::<u64>(), h in prop::collection::vec(1usize..12, 1..3),
                              x in prop::collection::vec(-4.0f64..4.0, 3)) {
        let net = policy_net(seed, &h, ActionTransform::Clip);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        save_portable_weights(&path, &net).unwrap();
        let back = load_portable_weights(&path).unwrap();
        prop_assert_eq!(&back, &net);
        let (a, b) = (net.forward(&x).unwrap(), back.forward(&x).unwrap());
        prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
}

#[test]
fn recorded_probes_verify() {
    let env = Pendulum::default();
    let net = policy_net(2, &[16, 16], ActionTransform::Scale);
    let mut rng = seed::stream(3, seed::STREAM_AUX);
    let inputs: Vec<Vec<f64>> = (0..100)
        .map(|_| env.observe(&env.sample_initial(&mut rng)))
        .collect();
    let file = WeightsFile::from_network(&net)
        .with_probes(&net, &inputs)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    save_weights_file(&path, &file).unwrap();
    let (loaded, back) = load_weights_file(&path).unwrap();
    assert_eq!(back.probes.len(), 100);
    let report = verify_probes(&loaded, &back.probes, PROBE_TOLERANCE).unwrap();
    assert!(report.passed());
    assert_eq!(report.max_abs_error, 0.0);

    let mut tampered = back.clone();
    tampered.probes[7].output[0] += 2e-5;
    let report = verify_probes(&loaded, &tampered.probes, PROBE_TOLERANCE).unwrap();
    assert!(!report.passed());
    assert_eq!(report.worst, Some(7));
}

#[test]
fn probe_outputs_are_raw_network_outputs() {
    // Scale maps tanh output u to the action 2u; probes keep u.
    let net = policy_net(4, &[4], ActionTransform::Scale);
    let x = vec![0.3, -0.9, 1.2];
    let file = WeightsFile::from_network(&net)
        .with_probes(&net, std::slice::from_ref(&x))
        .unwrap();
    assert_eq!(file.probes[0].output, net.forward(&x).unwrap());
    assert!(file.probes[0].output[0].abs() <= 1.0);
}

fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&sample_json()).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn broken_files_give_named_errors() {
    assert!(parse_weights(&sample_json()).is_ok());
    let chain = edit(|v| v["layers"][1]["in"] = 5.into());
    assert!(matches!(
        parse_weights(&chain),
        Err(WeightsError::WeightShape { .. } | WeightsError::DimChain { .. })
    ));
    let chain = edit(|v| {
        v["layers"][1]["in"] = 5.into();
        v["layers"][1]["weights"] = serde_json::json!([0.0, 0.0, 0.0, 0.0, 0.0]);
    });
    assert!(matches!(
        parse_weights(&chain),
        Err(WeightsError::DimChain {
            layer: 1,
            expected: 5,
            found: 4
        })
    ));
    let act = edit(|v| v["layers"][0]["activation"] = "lstm".into());
    assert!(matches!(parse_weights(&act), Err(WeightsError::UnknownActivation(a)) if a == "lstm"));
    let shape = edit(|v| v["layers"][0]["bias"] = serde_json::json!([0.0]));
    assert!(matches!(
        parse_weights(&shape),
        Err(WeightsError::WeightShape {
            layer: 0,
            what: "bias",
            ..
        })
    ));
    for bad in [
        edit(|v| v["format"] = "onnx".into()),
        edit(|v| v["version"] = 2.into()),
        edit(|v| v["role"] = "q-function".into()),
        edit(|v| v["observation_dim"] = 4.into()),
        edit(|v| v["action_transform"] = "squash".into()),
        edit(|v| {
            v.as_object_mut().unwrap().remove("layers");
        }),
        edit(|v| v["extra"] = 1.into()),
    ] {
        assert!(
            matches!(parse_weights(&bad), Err(WeightsError::Schema(_))),
            "{bad}"
        );
    }
    assert!(matches!(
        parse_weights("{not json"),
        Err(WeightsError::Json(_))
    ));
    assert!(matches!(
        load_portable_weights(std::path::Path::new("/nonexistent/w.json")),
        Err(WeightsError::Io { .. })
    ));
}
