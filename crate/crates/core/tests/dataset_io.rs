use std::fs;

use colpnets::control::Topology;
use colpnets::dataset::{generate, load, load_config, save, DatasetConfig, MANIFEST_FILE, PAIRS_FILE};
use colpnets::lie::GroupKind;

fn small(group: GroupKind) -> DatasetConfig {
    DatasetConfig {
        num_trajectories: 4,
        points_per_trajectory: 5,
        seed: 99,
        ..DatasetConfig::defaults(group)
    }
}

#[test]
fn round_trip_is_bit_exact() {
    for group in [GroupKind::So3, GroupKind::Se3] {
        let dir = tempfile::tempdir().unwrap();
        let pairs = generate(&small(group)).unwrap();
        save(&pairs, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back.config, pairs.config);
        assert_eq!(back.provenance, pairs.provenance);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.begin), bits(&pairs.begin));
        assert_eq!(bits(&back.end), bits(&pairs.end));
    }
}

#[test]
fn default_so3_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = generate(&DatasetConfig::defaults(GroupKind::So3)).unwrap();
    assert_eq!(pairs.len(), 2000);
    save(&pairs, dir.path()).unwrap();
    assert_eq!(load(dir.path()).unwrap(), pairs);
}

#[test]
fn file_layout() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = generate(&small(GroupKind::So3)).unwrap();
    save(&pairs, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join(PAIRS_FILE)).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("traj,step,b_0,b_1,"));
    assert!(header.ends_with(",e_7,e_8"));
    assert_eq!(csv.lines().count(), 1 + 16);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    for key in [
        "schema_version",
        "group",
        "topology",
        "num_particles",
        "algebra_dim",
        "chi",
        "dt",
        "num_trajectories",
        "points_per_trajectory",
        "seed",
        "rng_name",
        "ic_box",
        "pairs_file",
    ] {
        assert!(manifest.get(key).is_some(), "missing {key}");
    }
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["algebra_dim"], 3);
}

fn edit_manifest(dir: &std::path::Path, f: impl FnOnce(&mut serde_json::Value)) {
    let path = dir.join(MANIFEST_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
}

#[test]
fn load_rejects_bad_inputs() {
    let pairs = generate(&small(GroupKind::Se3)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    save(&pairs, dir.path()).unwrap();
    edit_manifest(dir.path(), |v| v["group"] = "se2".into());
    let err = load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("unknown group"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    save(&pairs, dir.path()).unwrap();
    edit_manifest(dir.path(), |v| v["schema_version"] = 2.into());
    assert!(load(dir.path()).unwrap_err().to_string().contains("schema_version"));

    let dir = tempfile::tempdir().unwrap();
    save(&pairs, dir.path()).unwrap();
    let csv_path = dir.path().join(PAIRS_FILE);
    let csv = fs::read_to_string(&csv_path).unwrap();
    let truncated: Vec<&str> = csv.lines().take(5).collect();
    fs::write(&csv_path, truncated.join("\n")).unwrap();
    let err = load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("rows"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    save(&pairs, dir.path()).unwrap();
    let short: String = csv
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 2 { l.rsplit_once(',').unwrap().0.to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join(PAIRS_FILE), short).unwrap();
    assert!(load(dir.path()).unwrap_err().to_string().contains("fields"));

    let empty = tempfile::tempdir().unwrap();
    assert!(load(empty.path()).is_err());
}

#[test]
fn custom_topology_round_trips() {
    let cfg = DatasetConfig {
        topology: Topology::Custom(vec![vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 0]]),
        ..small(GroupKind::So3)
    };
    let dir = tempfile::tempdir().unwrap();
    save(&generate(&cfg).unwrap(), dir.path()).unwrap();
    assert_eq!(load_config(dir.path()).unwrap().0.topology, cfg.topology);
}
