use std::path::Path;
use std::process::Command;

const HEADER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/include/smoothing_averse.h");

#[test]
fn header_declares_every_entry_point() {
    let text = std::fs::read_to_string(HEADER).unwrap();
    for name in [
        "sa_last_error_message",
        "sa_version",
        "sa_hmm_from_json",
        "sa_hmm_free",
        "sa_hmm_n_states",
        "sa_hmm_n_controls",
        "sa_filter_update",
        "sa_stage_reward",
        "sa_smoother_entropy_enumeration",
        "sa_policy_load",
        "sa_policy_free",
        "sa_policy_horizon",
        "sa_policy_lookup",
        "sa_discrete_entropy",
        "sa_gaussian_entropy3",
        "typedef struct SaHmm SaHmm;",
        "typedef struct SaPolicy SaPolicy;",
        "SA_STATUS_OK = 0",
        "SA_STATUS_PANIC = 8",
    ] {
        assert!(text.contains(name), "header is missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        "#include \"smoothing_averse.h\"\nint main(void) { SaHmm *h = 0; double p[2] = {0.5, 0.5}, out;\n\
         SaStatus s = sa_discrete_entropy(p, 2, &out); sa_hmm_free(h); return s == SA_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = Path::new(HEADER).parent().unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
