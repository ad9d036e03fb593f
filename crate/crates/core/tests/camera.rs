use cage_core::camera::*;

fn checkerboard(size: u32, square: u32, lo: u8, hi: u8) -> CameraFrame {
    let pixels = (0..size * size)
        .map(|i| {
            let (x, y) = (i % size, i / size);
            if ((x / square) + (y / square)) % 2 == 1 {
                hi
            } else {
                lo
            }
        })
        .collect();
    CameraFrame::new(CameraId::Front, size, size, pixels, 0)
}

#[test]
fn uniform_frame_scores_zero() {
    let f = CameraFrame::uniform(CameraId::Back, 16, 12, 128);
    assert_eq!(sharpness(&f).unwrap(), 0.0);
    assert_eq!(validate(&f, &ValidatorConfig::default()).unwrap(), SensorValidity::Invalid);
}

#[test]
fn pixel_checkerboard_matches_reference() {
    // Reference value from a numpy evaluation of the same kernel.
    assert_eq!(sharpness(&checkerboard(8, 1, 0, 255)).unwrap(), 1040400.0);
    assert_eq!(sharpness(&checkerboard(32, 4, 0, 255)).unwrap(), 89012.0);
    assert_eq!(validate(&checkerboard(8, 1, 0, 255), &ValidatorConfig::default()).unwrap(), SensorValidity::Valid);
}

#[test]
fn rejects_small_or_inconsistent_frames() {
    let tiny = CameraFrame::uniform(CameraId::Front, 2, 5, 0);
    assert_eq!(sharpness(&tiny), Err(CameraError::TooSmall { width: 2, height: 5 }));
    let bad = CameraFrame::new(CameraId::Front, 4, 4, vec![0; 15], 0);
    assert_eq!(validate(&bad, &ValidatorConfig::default()), Err(CameraError::SizeMismatch { expected: 16, actual: 15 }));
}

#[test]
fn per_camera_threshold_override() {
    let mut cfg = ValidatorConfig::default();
    cfg.per_camera.insert(CameraId::Left, 2.0e6);
    let mut f = checkerboard(8, 1, 0, 255);
    assert_eq!(validate(&f, &cfg).unwrap(), SensorValidity::Valid);
    f.camera_id = CameraId::Left;
    assert_eq!(validate(&f, &cfg).unwrap(), SensorValidity::Invalid);
}

#[test]
fn thumbnail_fits_bounds() {
    let f = checkerboard(64, 8, 0, 255);
    let t = f.thumbnail(20, 20);
    assert_eq!((t.width, t.height), (16, 16));
    assert_eq!(t.pixels.len(), 256);
    assert_eq!(f.thumbnail(160, 120), f);
}
