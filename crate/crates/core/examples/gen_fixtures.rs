//! Regenerates the OBJ fixtures under `crates/core/fixtures/`.

use std::fs;

use tactile_core::geometry::write_obj;
use tactile_core::simkit::fixtures::{self, build};

fn main() -> std::io::Result<()> {
    let dir = fixtures::dir();
    fs::create_dir_all(&dir)?;
    for (name, mesh) in build::all() {
        fs::write(dir.join(name), write_obj(&mesh))?;
        println!("{name}: {} faces, {:.0} mm^2", mesh.face_count(), mesh.area());
    }
    Ok(())
}
