mod common;

use robustdense::model::ModelConfig;

fn assert_close(name: &str, probes: robustdense::Result<Vec<robustdense::gradcheck::Probe>>) {
    let probes = probes.unwrap();
    assert!(probes.len() >= 5, "{name}: {} probes", probes.len());
    let worst = common::max_rel(&probes);
    assert!(worst <= 1e-4, "{name}: worst relative error {worst:e}: {probes:#?}");
}

#[test]
fn se_layer() {
    assert_close("se", common::check_se_layer(10, 1));
}

#[test]
fn semix_block() {
    assert_close("semix", common::check_semix(10, 2));
}

#[test]
fn up_block_including_blend_weight() {
    assert_close("up", common::check_up_block(10, 3));
}

#[test]
fn sconv_head() {
    assert_close("sconv", common::check_sconv_head(10, 4));
}

#[test]
fn every_dense_stage() {
    for index in 1..=6 {
        assert_close(&format!("stage{index}"), common::check_dense_stage(index, 8, 10 + index as u64));
    }
}

#[test]
fn dsm_branch() {
    assert_close("dsm", common::check_dsm_branch(8, 5));
}

#[test]
fn micro_network_and_ablations() {
    let full = ModelConfig::micro(6);
    assert_close("micro", common::check_full_forward(full.clone(), 10, 6));
    assert_close(
        "micro no-semix",
        common::check_full_forward(ModelConfig { semix: false, ..full.clone() }, 10, 7),
    );
    assert_close(
        "micro plain",
        common::check_full_forward(ModelConfig { up_fusion: false, ..full }, 10, 8),
    );
}
