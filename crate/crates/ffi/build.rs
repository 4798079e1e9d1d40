use std::env;
use std::fs;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let out_dir = PathBuf::from(env::var("OUT_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let bindings = cbindgen::generate_with_config(&crate_dir, config).expect("generate C header");
    let generated = out_dir.join("pnn.h");
    bindings.write_to_file(&generated);

    // Keep the checked-in copy current; a read-only source tree only loses the refresh.
    let header = fs::read(&generated).unwrap();
    let published = crate_dir.join("include").join("pnn.h");
    if fs::read(&published).ok().as_deref() != Some(header.as_slice()) {
        let written = fs::create_dir_all(published.parent().unwrap()).and_then(|_| fs::write(&published, &header));
        if let Err(e) = written {
            println!("cargo:warning=could not refresh {}: {e}", published.display());
        }
    }
}
