mod common;

use pike_core::config::Config;
use pike_core::dynamics;
use pike_core::io;
use pike_core::{EmbeddingMode, PikeError};

#[test]
fn embedding_round_trip_is_exact() {
    let (emb, system) = common::unicycle_embedding(30, EmbeddingMode::PhysicsInformed, 1);
    let mut buf = Vec::new();
    io::write_embedding(&emb, Some(&system), &mut buf).unwrap();
    let loaded = io::read_embedding(&buf[..]).unwrap();
    let c = |y: &[f64]| y[0] * y[0] + y[1];
    let data = emb.dataset();
    for i in 0..data.len() {
        let (x, u) = (data.states().row(i), data.actions().row(i));
        let a = emb.expectation(x, u, &c).unwrap();
        let b = loaded.expectation(x, u, &c).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn data_driven_container_needs_no_system() {
    let (emb, _) = common::unicycle_embedding(10, EmbeddingMode::DataDriven, 2);
    let mut buf = Vec::new();
    io::write_embedding(&emb, None, &mut buf).unwrap();
    let loaded = io::read_embedding(&buf[..]).unwrap();
    assert_eq!(loaded.mode(), EmbeddingMode::DataDriven);
    assert_eq!(loaded.dataset(), emb.dataset());
}

#[test]
fn physics_informed_container_without_system_is_rejected() {
    let (emb, _) = common::unicycle_embedding(10, EmbeddingMode::PhysicsInformed, 3);
    let mut buf = Vec::new();
    io::write_embedding(&emb, None, &mut buf).unwrap();
    assert!(io::read_embedding(&buf[..]).is_err());
}

#[test]
fn tampered_container_is_revalidated() {
    let (emb, system) = common::unicycle_embedding(5, EmbeddingMode::PhysicsInformed, 4);
    let mut file = io::EmbeddingFile::new(&emb, Some(&system));
    file.lambda = 0.0;
    assert!(matches!(file.refit(), Err(PikeError::InvalidRegularizer(_))));
    let mut file = io::EmbeddingFile::new(&emb, Some(&system));
    file.schema_version = 99;
    assert!(file.refit().is_err());
    let text = serde_json::to_string(&io::EmbeddingFile::new(&emb, Some(&system))).unwrap();
    let extra = text.replacen('{', "{\"unexpected\":1,", 1);
    assert!(matches!(
        io::read_embedding(extra.as_bytes()),
        Err(PikeError::Parse { .. })
    ));
}

#[test]
fn smd_dataset_csv_round_trip() {
    let cfg = Config::default();
    let region = Config::smd_region(cfg.smd_full_region).unwrap();
    let data = dynamics::sample_transitions(&cfg.smd_system(), &region, None, 50, &mut common::rng(5)).unwrap();
    let mut buf = Vec::new();
    io::write_dataset_csv(&data, &mut buf).unwrap();
    assert!(buf.starts_with(b"x_0,x_1,y_0,y_1\n"));
    assert_eq!(io::read_dataset_csv(&buf[..]).unwrap(), data);
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let mut buf = Vec::new();
    io::write_trajectory_csv(&[vec![0.1, 0.1], vec![0.2, 0.0]], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x_0,x_1");
    assert_eq!(text.lines().count(), 3);
}
