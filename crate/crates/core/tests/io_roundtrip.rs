// SPDX-License-Identifier: MIT OR Apache-2.0

use mlnet_cpd::io::{
    descriptor_path, format_edge_list, parse_edge_list, read_edge_list, read_json, write_edge_list, write_json,
    ChangePointFile, Descriptor,
};
use mlnet_cpd::{gen_scenario, RunConfig, Tensor3, TensorSeries};
use proptest::prelude::*;

fn binary_series() -> impl Strategy<Value = TensorSeries<f64>> {
    (1usize..5, 1usize..3, 2usize..6).prop_flat_map(|(n, l, t)| {
        prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.3), n * n * l), t).prop_map(move |snaps| {
            TensorSeries::new(
                snaps
                    .into_iter()
                    .map(|v| Tensor3::from_vec((n, n, l), v.into_iter().map(f64::from).collect()).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn edge_list_text_round_trips(x in binary_series()) {
        let mut buf = Vec::new();
        format_edge_list(&x, &mut buf).unwrap();
        let back: TensorSeries<f64> = parse_edge_list(buf.as_slice(), Some(Descriptor::of(&x))).unwrap();
        prop_assert_eq!(back, x);
    }
}

#[test]
fn files_round_trip_through_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_scenario::<f64>(2, 12, 30, 2, 4).unwrap();
    let path = dir.path().join("a.csv");
    write_edge_list(&path, &data.a).unwrap();
    assert!(descriptor_path(&path).exists());
    let back: TensorSeries<f64> = read_edge_list(&path, None).unwrap();
    assert_eq!(back, data.a);

    // an all-zero trailing snapshot survives only with the descriptor
    let mut snaps = data.a.snapshots().to_vec();
    snaps.push(Tensor3::zeros(data.a.shape()));
    let padded = TensorSeries::new(snaps).unwrap();
    write_edge_list(&path, &padded).unwrap();
    assert_eq!(read_edge_list::<f64>(&path, None).unwrap().len(), 31);
    std::fs::remove_file(descriptor_path(&path)).unwrap();
    assert!(read_edge_list::<f64>(&path, None).unwrap().len() <= 30);
}

#[test]
fn change_point_and_config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cps = ChangePointFile {
        horizon: 200,
        change_points: vec![40, 120],
    };
    let path = dir.path().join("cps.json");
    write_json(&path, &cps).unwrap();
    assert_eq!(read_json::<ChangePointFile>(&path).unwrap(), cps);

    let cfg = RunConfig {
        scenario: 3,
        seed: 77,
        ..RunConfig::default()
    };
    let toml_path = dir.path().join("run.toml");
    std::fs::write(&toml_path, cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(RunConfig::load(&toml_path).unwrap(), cfg);
}
