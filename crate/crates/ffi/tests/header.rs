use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "xsl.h"
int main(void) {
    XslInventory *inv = NULL;
    if (xsl_inventory_coco80(&inv) != XSL_STATUS_OK) return 1;
    uint64_t counts[80];
    XslStatus st = xsl_target_counts(inv, 180, XSL_CONDITION_NATURAL, counts, xsl_inventory_len(inv));
    xsl_inventory_free(inv);
    XslRecall r;
    double s[4] = {1, 0, 0, 1};
    xsl_recall_at_k(s, 2, 1, &r);
    char buf[64];
    xsl_last_error_message(buf, sizeof buf);
    return st == XSL_STATUS_OK ? 0 : 1;
}
"#;

#[test]
fn generated_header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("xsl.h").exists(), "build script did not write the header");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(out) => out,
        Err(_) => {
            eprintln!("no C compiler found; skipping");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
