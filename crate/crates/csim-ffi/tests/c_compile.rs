//! Compiles and runs a small C client against the generated header and the
//! static library, proving the ABI end to end without any Rust on the
//! caller's side.

use std::path::PathBuf;
use std::process::Command;

const C_CLIENT: &str = r#"
#include "csim.h"
#include <stdio.h>
#include <string.h>

int main(void) {
    if (csim_version() == NULL) return 10;

    CsimScenario *scenario = csim_scenario_default();
    if (scenario == NULL) return 11;
    if (csim_scenario_set(scenario, "n_wbans", "3") != CsimStatus_Ok) return 12;
    if (csim_scenario_set(scenario, "superframes", "12") != CsimStatus_Ok) return 13;
    if (csim_scenario_set(scenario, "bogus", "1") != CsimStatus_InvalidConfig) return 14;

    char *json = NULL;
    if (csim_run(scenario, &json) != CsimStatus_Ok) return 15;
    if (json == NULL || strstr(json, "\"pr_avchs\"") == NULL) return 16;
    csim_string_free(json);
    csim_scenario_free(scenario);
    return 0;
}
"#;

fn find_staticlib() -> Option<PathBuf> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = manifest.parent()?.parent()?.join("target");
    ["debug", "release"]
        .iter()
        .map(|p| target.join(p).join("libcsim_ffi.a"))
        .filter(|p| p.exists())
        .max_by_key(|p| p.metadata().and_then(|m| m.modified()).ok())
}

#[test]
fn c_client_compiles_links_and_runs() {
    let lib = find_staticlib().expect("staticlib built alongside the tests");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, C_CLIENT).unwrap();

    let compile = Command::new("cc")
        .arg(&src)
        .arg(&lib)
        .arg("-I")
        .arg(&include)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .expect("cc available");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "C client exited with {:?}",
        run.status.code()
    );
}
