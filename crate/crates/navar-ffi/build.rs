//! Regenerates `include/navar.h` from the public FFI surface. The header is
//! rewritten only when its content changes so downstream builds that depend
//! on its timestamp stay incremental.

use std::env;
use std::fs;
use std::path::PathBuf;

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("cargo sets manifest dir"));
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml"))
        .expect("cbindgen.toml is well-formed");
    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("the FFI surface is representable in C");

    let mut generated = Vec::new();
    bindings.write(&mut generated);

    let header = crate_dir.join("include").join("navar.h");
    if fs::read(&header).ok().as_deref() != Some(generated.as_slice()) {
        fs::create_dir_all(header.parent().expect("header path has a parent"))
            .expect("include directory is writable");
        fs::write(&header, &generated).expect("header is writable");
    }
}
