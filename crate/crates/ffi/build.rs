use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include").join("motionforge.h");

    let mut config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("MOTIONFORGE_H".into()),
        header: Some("/* Generated by cbindgen; do not edit. */".into()),
        cpp_compat: true,
        ..Default::default()
    };
    config.enumeration.prefix_with_name = true;
    config.enumeration.rename_variants = cbindgen::RenameRule::ScreamingSnakeCase;

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(header);

    println!("cargo:rerun-if-changed=src/lib.rs");
}
