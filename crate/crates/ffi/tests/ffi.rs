use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use odr_core::engine::{ChannelOrder, DType, Data, Image, ImageFormat, Layout, PixelBuffer, Target};
use odr_core::learner::{Hyperparams, Learner, Registry};
use odr_core::learners::CentroidLearner;
use odr_ffi::*;

fn cli_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures")
}

/// Builds the fixture centroid package with the CLI into `dir/model`.
fn fixture_package(dir: &Path) -> PathBuf {
    let f = cli_fixtures();
    let dest = dir.join("model");
    let args = [
        "odr".to_string(),
        "package".into(),
        "--manifest".into(),
        f.join("centroid_src/manifest.json").display().to_string(),
        "--payload-dir".into(),
        f.join("centroid_src/payload").display().to_string(),
        "--out".into(),
        dest.display().to_string(),
    ];
    let code = odr_cli::run(args, &Registry::with_builtins(), &mut Vec::new(), &mut Vec::new());
    assert_eq!(code, 0);
    dest
}

fn load(path: &Path) -> (OdrStatus, OdrHandle) {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: OdrHandle = 777;
    let status = unsafe { odr_load_centroid(c.as_ptr(), &mut handle) };
    (status, handle)
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    assert_eq!(unsafe { odr_last_error(buf.as_mut_ptr(), buf.len()) }, ODR_OK);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

/// Encodes `img` in `fmt` and returns the bytes plus a descriptor pointing at them.
fn encode(img: &Image, fmt: ImageFormat) -> (Vec<u8>, u32, u32, u32) {
    let bytes = match img.convert(fmt) {
        PixelBuffer::U8(v) => v,
        PixelBuffer::F32(v) => v.iter().flat_map(|x| x.to_ne_bytes()).collect(),
    };
    let layout = match fmt.layout {
        Layout::Chw => ODR_LAYOUT_CHW,
        Layout::Hwc => ODR_LAYOUT_HWC,
    };
    let order = match fmt.channel_order {
        ChannelOrder::Rgb => ODR_ORDER_RGB,
        ChannelOrder::Bgr => ODR_ORDER_BGR,
    };
    let dtype = match fmt.dtype {
        DType::U8 => ODR_DTYPE_U8,
        DType::F32 => ODR_DTYPE_F32,
    };
    (bytes, layout, order, dtype)
}

fn desc(img: &Image, bytes: &[u8], layout: u32, order: u32, dtype: u32) -> OdrImageDesc {
    OdrImageDesc {
        data: bytes.as_ptr(),
        len: bytes.len() as u64,
        width: img.width() as u32,
        height: img.height() as u32,
        channels: img.channels() as u32,
        layout,
        channel_order: order,
        dtype,
    }
}

fn infer(handle: OdrHandle, d: &OdrImageDesc) -> (OdrStatus, OdrCategoryOut) {
    let mut out = OdrCategoryOut::default();
    let status = unsafe { odr_infer_centroid(handle, d, &mut out) };
    (status, out)
}

fn description(out: &OdrCategoryOut) -> String {
    unsafe { CStr::from_ptr(out.description.as_ptr()) }.to_str().unwrap().to_string()
}

#[test]
fn load_infer_free_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let pkg = fixture_package(dir.path());
    let (status, handle) = load(&pkg);
    assert_eq!(status, ODR_OK);
    assert_ne!(handle, 0);

    let img = odr_core::engine::image_open(cli_fixtures().join("probe.pgm")).unwrap();
    let (bytes, l, o, t) = encode(&img, ImageFormat::CANONICAL);
    let (status, out) = infer(handle, &desc(&img, &bytes, l, o, t));
    assert_eq!(status, ODR_OK);
    assert_eq!(out.index, 0);
    assert_eq!(description(&out), "a");

    // same line the CLI prints for this image
    let mut stdout = Vec::new();
    let code = odr_cli::run(
        [
            "odr",
            "infer",
            "--model",
            pkg.to_str().unwrap(),
            "--learner",
            "centroid",
            "--input",
            cli_fixtures().join("probe.pgm").to_str().unwrap(),
        ],
        &Registry::with_builtins(),
        &mut stdout,
        &mut Vec::new(),
    );
    assert_eq!(code, 0);
    assert_eq!(
        String::from_utf8(stdout).unwrap(),
        format!("Category({} '{}', conf={:.3})\n", out.index, description(&out), out.confidence)
    );

    assert_eq!(odr_free(handle), ODR_OK);
    assert_eq!(infer(handle, &desc(&img, &bytes, l, o, t)).0, ODR_BAD_HANDLE);
    assert_eq!(odr_free(handle), ODR_BAD_HANDLE);
    assert!(last_error().contains("BadHandle"));

    let (_, again) = load(&pkg);
    assert!(again > handle, "handles are not reused");
    assert_eq!(odr_free(again), ODR_OK);
    assert_eq!(odr_free(0), ODR_BAD_HANDLE);
}

#[test]
fn random_probes_match_in_process_inference() {
    let dir = tempfile::tempdir().unwrap();
    let pkg = fixture_package(dir.path());
    let (_, handle) = load(&pkg);
    let mut reference = CentroidLearner::new(&Hyperparams::new()).unwrap();
    reference.load(&pkg).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let formats = ImageFormat::all();
    for i in 0..100 {
        let pixels: Vec<u8> = (0..16).map(|_| rng.gen()).collect();
        let img = Image::from_canonical(4, 4, 1, pixels).unwrap();
        let (bytes, l, o, t) = encode(&img, formats[i % formats.len()]);
        let (status, out) = infer(handle, &desc(&img, &bytes, l, o, t));
        assert_eq!(status, ODR_OK);

        let Target::Category(c) = &reference.infer(&Data::Image(img)).unwrap()[0] else {
            panic!("not a category")
        };
        assert_eq!(out.index, c.index, "probe {i}");
        let want = c.confidence.unwrap();
        assert!((out.confidence - want).abs() <= 1e-12 * want.abs().max(1.0), "probe {i}");
        assert_eq!(description(&out), c.description.clone().unwrap());
    }
    assert_eq!(odr_free(handle), ODR_OK);
}

#[test]
fn load_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (status, handle) = load(&dir.path().join("missing"));
    assert_eq!(status, ODR_NOT_FOUND);
    assert_eq!(handle, 777, "out_handle untouched");

    let pkg = fixture_package(dir.path());
    let payload = pkg.join("centroids.bin");
    let mut bytes = std::fs::read(&payload).unwrap();
    bytes[30] ^= 0x80;
    std::fs::write(&payload, bytes).unwrap();
    let (status, handle) = load(&pkg);
    assert_eq!(status, ODR_BAD_PACKAGE);
    assert_eq!(handle, 777);
    let msg = last_error();
    assert!(msg.contains("centroids.bin"), "{msg}");
    assert!(msg.contains("ChecksumMismatch"), "{msg}");

    assert_eq!(unsafe { odr_load_centroid(std::ptr::null(), &mut 0) }, ODR_BAD_INPUT);
}

#[test]
fn bad_descriptors() {
    let dir = tempfile::tempdir().unwrap();
    let (_, handle) = load(&fixture_package(dir.path()));
    let img = Image::zeros(4, 4, 1).unwrap();
    let bytes = vec![0u8; 16];

    let mut d = desc(&img, &bytes, 0, 0, 0);
    d.len = 15;
    assert_eq!(infer(handle, &d).0, ODR_BAD_INPUT);
    assert!(last_error().contains("LengthMismatch"));
    assert_eq!(infer(handle, &desc(&img, &bytes, 2, 0, 0)).0, ODR_BAD_INPUT);
    assert_eq!(infer(handle, &desc(&img, &bytes, 0, 5, 0)).0, ODR_BAD_INPUT);
    assert_eq!(infer(handle, &desc(&img, &bytes, 0, 0, 1)).0, ODR_BAD_INPUT);
    // f32 samples outside [0, 1]
    let floats: Vec<u8> = [2.0f32; 16].iter().flat_map(|x| x.to_ne_bytes()).collect();
    assert_eq!(infer(handle, &desc(&img, &floats, 0, 0, 1)).0, ODR_BAD_INPUT);
    // wrong feature width for the model
    let rgb = Image::zeros(4, 4, 3).unwrap();
    let rgb_bytes = vec![0u8; 48];
    assert_eq!(infer(handle, &desc(&rgb, &rgb_bytes, 0, 0, 0)).0, ODR_BAD_INPUT);
    let d = desc(&img, &bytes, 0, 0, 0);
    assert_eq!(unsafe { odr_infer_centroid(handle, &d, std::ptr::null_mut()) }, ODR_BAD_INPUT);
    assert_eq!(odr_free(handle), ODR_OK);
}

#[test]
fn last_error_truncates_and_rejects_empty_buffers() {
    assert_eq!(odr_free(u64::MAX), ODR_BAD_HANDLE);
    let mut buf = [1 as c_char; 5];
    assert_eq!(unsafe { odr_last_error(buf.as_mut_ptr(), buf.len()) }, ODR_OK);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "BadH");
    assert_eq!(unsafe { odr_last_error(buf.as_mut_ptr(), 0) }, ODR_BAD_INPUT);
}

#[test]
fn last_error_is_per_thread() {
    assert_eq!(odr_free(u64::MAX - 1), ODR_BAD_HANDLE);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(last_error().contains("BadHandle"));
}

#[test]
fn concurrent_handles() {
    let dir = tempfile::tempdir().unwrap();
    let pkg = fixture_package(dir.path());
    let (_, shared) = load(&pkg);
    let threads: Vec<_> = (0..8)
        .map(|t| {
            let pkg = pkg.clone();
            std::thread::spawn(move || {
                let (status, own) = load(&pkg);
                assert_eq!(status, ODR_OK);
                let mut rng = ChaCha8Rng::seed_from_u64(t);
                for _ in 0..50 {
                    let img = Image::from_canonical(4, 4, 1, (0..16).map(|_| rng.gen()).collect()).unwrap();
                    let (bytes, l, o, d) = encode(&img, ImageFormat::CANONICAL);
                    let a = infer(own, &desc(&img, &bytes, l, o, d));
                    let b = infer(shared, &desc(&img, &bytes, l, o, d));
                    assert_eq!((a.0, b.0), (ODR_OK, ODR_OK));
                    assert_eq!(a.1.index, b.1.index);
                    assert_eq!(a.1.confidence.to_bits(), b.1.confidence.to_bits());
                }
                assert_eq!(odr_free(own), ODR_OK);
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    assert_eq!(odr_free(shared), ODR_OK);
}
