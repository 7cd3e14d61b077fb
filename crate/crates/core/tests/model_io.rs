use colpnets::dataset::{generate, DatasetConfig};
use colpnets::lie::{GroupKind, GroupSpec};
use colpnets::model::CoLpNet;
use colpnets::train::{train, TrainConfig};

#[test]
fn trained_model_round_trips_exactly() {
    let pairs = generate(&DatasetConfig {
        num_trajectories: 3,
        points_per_trajectory: 6,
        seed: 1,
        ..DatasetConfig::defaults(GroupKind::Se3)
    })
    .unwrap();
    let m = CoLpNet::with_defaults(GroupSpec::SE3, 3, 3, 0.1).unwrap();
    let out = train(m, &pairs, &TrainConfig { epochs: 20, seed: 5, ..TrainConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    out.model.save(&path).unwrap();
    let back = CoLpNet::load(&path).unwrap();
    assert_eq!(back, out.model);
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["total_params"], 1098);
    assert_eq!(v["schedule"].as_array().unwrap().len(), 18);
    assert_eq!(v["schedule"][6]["particle"], 1);
}

#[test]
fn load_rejects_inconsistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    CoLpNet::with_defaults(GroupSpec::SO3, 3, 3, 0.1).unwrap().save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["width"] = 4.into();
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(CoLpNet::load(&path).is_err());
    std::fs::write(&path, "{").unwrap();
    assert!(CoLpNet::load(&path).is_err());
}
