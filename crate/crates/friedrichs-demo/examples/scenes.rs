//! Prints each scene's JSON for canonical knob settings: the exact payloads
//! the browser page receives. Useful for eyeballing the contract without a
//! WebAssembly toolchain.

fn main() {
    let kernel = friedrichs_demo::kernel_scene(0.05, 0.0, 30.0);
    let decay = friedrichs_demo::decay_scene(0.05, 0.1, 60.0);
    let flat = friedrichs_demo::flattening_scene(0.1, 0.02, 50.0, 6);
    println!("kernel_scene(0.05, 0.0, 30.0):\n{kernel}\n");
    println!("decay_scene(0.05, 0.1, 60.0):\n{decay}\n");
    println!("flattening_scene(0.1, 0.02, 50.0, 6):\n{flat}");
}
