// Hashes the library and driver sources into PANTS_CODE_HASH.
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    for e in entries.flatten() {
        let p = e.path();
        if p.is_dir() {
            collect(&p, out);
        } else if p.extension().is_some_and(|x| x == "rs") {
            out.push(p);
        }
    }
}

fn main() {
    let root = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    let dirs = [("cli", root.join("src")), ("core", root.join("../core/src"))];
    let mut h = Sha256::new();
    for (label, d) in &dirs {
        println!("cargo:rerun-if-changed={}", d.display());
        let mut files = Vec::new();
        collect(d, &mut files);
        files.sort();
        for f in &files {
            // relative names keep the hash independent of the checkout location
            let rel = f.strip_prefix(d).unwrap_or(f);
            h.update(format!("{label}/{}", rel.to_string_lossy()).as_bytes());
            h.update(fs::read(f).unwrap());
        }
    }
    let hex: String = h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();
    println!("cargo:rustc-env=PANTS_CODE_HASH={hex}");
}
