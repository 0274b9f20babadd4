//! Every example runs to completion.

#[path = "../examples/knn_fps.rs"]
mod knn_fps;

#[test]
fn knn_fps_runs() {
    knn_fps::main();
}

#[path = "../examples/geodesic_patches.rs"]
mod geodesic_patches;

#[test]
fn geodesic_patches_runs() {
    geodesic_patches::main();
}

#[path = "../examples/mesh_sampling.rs"]
mod mesh_sampling;

#[test]
fn mesh_sampling_runs() {
    mesh_sampling::main();
}

#[path = "../examples/evaluate.rs"]
mod evaluate;

#[test]
fn evaluate_runs() {
    evaluate::main();
}

#[path = "../examples/gradient_check.rs"]
mod gradient_check;

#[test]
fn gradient_check_runs() {
    gradient_check::main();
}

#[path = "../examples/self_projection_denoise.rs"]
mod self_projection_denoise;

#[test]
fn self_projection_denoise_runs() {
    self_projection_denoise::main();
}

#[path = "../examples/ablation.rs"]
mod ablation;

#[test]
fn ablation_runs() {
    ablation::main();
}

#[path = "../examples/train_and_resume.rs"]
mod train_and_resume;

#[test]
fn train_and_resume_runs() {
    train_and_resume::main();
}

#[path = "../examples/upsample_sphere.rs"]
mod upsample_sphere;

#[test]
fn upsample_sphere_runs() {
    upsample_sphere::main();
}
