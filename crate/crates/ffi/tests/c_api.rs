use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mclner::archive::{ModelArchive, TrainingMeta};
use mclner::corpus::{build_vocabulary, parse_corpus, Schema};
use mclner::embeddings::WindowConfig;
use mclner::model::{Model, ModelConfig};
use mclner::network::{Architecture, NetworkConfig};
use mclner_ffi::*;

const CORPUS: &str = "Astana astana 100010 B-LOC\nqalasy qala 101000 O\n\nNur nur 100010 B-PER\nSultan sultan 100010 I-PER\nkeldi kel 101000 O\n";

fn write_model(dir: &Path) -> (CString, Model) {
    let sentences = parse_corpus(CORPUS, &Schema::default()).unwrap();
    let vocab = build_vocabulary(&sentences, true, 1);
    let config = ModelConfig {
        window: WindowConfig {
            word_dim: 4,
            root_dim: 4,
            tag_dim: 3,
            use_root: true,
            use_features: true,
            ..WindowConfig::default()
        },
        network: NetworkConfig {
            architecture: Architecture::Tensor,
            tensor_size: 5,
            factors: 2,
            ..NetworkConfig::default()
        },
    };
    let model = Model::new(config, vocab, 11).unwrap();
    let path = dir.join("model.bin");
    ModelArchive::new(model.clone(), TrainingMeta::default())
        .save(&path)
        .unwrap();
    (CString::new(path.to_str().unwrap()).unwrap(), model)
}

fn last_error() -> String {
    let p = mcl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_tag_and_free() {
    let dir = tempfile::tempdir().unwrap();
    let (path, model) = write_model(dir.path());
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { mcl_model_load(path.as_ptr(), &mut handle) }, MclStatus::Ok);
    assert!(!handle.is_null());
    assert!(mcl_last_error_message().is_null());

    let mut n = 0;
    assert_eq!(unsafe { mcl_model_num_tags(handle, &mut n) }, MclStatus::Ok);
    assert_eq!(n, model.vocab.tags.len());
    let mut name = ptr::null();
    assert_eq!(unsafe { mcl_model_tag_name(handle, 0, &mut name) }, MclStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "O");
    assert_eq!(unsafe { mcl_model_tag_name(handle, n, &mut name) }, MclStatus::InvalidArgument);

    let sentence = parse_corpus("Nur nur 100010 B-PER\nUnseen unseen 000000 O\n", &Schema::default()).unwrap();
    let expected = model.decode(&sentence[0], false).unwrap();
    let owned: Vec<[CString; 3]> = sentence[0]
        .tokens
        .iter()
        .map(|t| {
            [
                CString::new(t.surface.as_str()).unwrap(),
                CString::new(t.root.as_str()).unwrap(),
                CString::new(t.morph.to_string()).unwrap(),
            ]
        })
        .collect();
    let surfaces: Vec<_> = owned.iter().map(|c| c[0].as_ptr()).collect();
    let roots: Vec<_> = owned.iter().map(|c| c[1].as_ptr()).collect();
    let morphs: Vec<_> = owned.iter().map(|c| c[2].as_ptr()).collect();
    let mut tags = vec![usize::MAX; surfaces.len()];
    let status = unsafe {
        mcl_model_tag(handle, surfaces.as_ptr(), roots.as_ptr(), morphs.as_ptr(), surfaces.len(), tags.as_mut_ptr())
    };
    assert_eq!(status, MclStatus::Ok);
    assert_eq!(tags, expected);

    let bad = CString::new("10x").unwrap();
    let bad_morphs = vec![bad.as_ptr(); surfaces.len()];
    let status = unsafe {
        mcl_model_tag(handle, surfaces.as_ptr(), ptr::null(), bad_morphs.as_ptr(), surfaces.len(), tags.as_mut_ptr())
    };
    assert_eq!(status, MclStatus::Parse);
    assert!(last_error().contains("token 1"));

    assert_eq!(
        unsafe { mcl_model_tag(handle, ptr::null(), ptr::null(), ptr::null(), 0, ptr::null_mut()) },
        MclStatus::Ok
    );
    unsafe { mcl_model_free(handle) };
    unsafe { mcl_model_free(ptr::null_mut()) };
}

#[test]
fn load_errors_carry_codes() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { mcl_model_load(ptr::null(), &mut handle) }, MclStatus::NullPointer);
    let missing = CString::new("/nonexistent/model.bin").unwrap();
    assert_eq!(unsafe { mcl_model_load(missing.as_ptr(), &mut handle) }, MclStatus::Io);
    assert!(handle.is_null());
    assert!(last_error().contains("/nonexistent/model.bin"));

    let dir = tempfile::tempdir().unwrap();
    let (path, _) = write_model(dir.path());
    let file = path.to_str().unwrap();
    let bytes = std::fs::read(file).unwrap();
    let text = b"MCLNER-ARCHIVE\nversion 1.0\n";
    let mut bumped = b"MCLNER-ARCHIVE\nversion 9.0\n".to_vec();
    bumped.extend_from_slice(&bytes[text.len()..]);
    std::fs::write(file, bumped).unwrap();
    assert_eq!(unsafe { mcl_model_load(path.as_ptr(), &mut handle) }, MclStatus::ArchiveVersion);
}

#[test]
fn evaluate_files_scores_chunks() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.txt");
    let pred = dir.path().join("pred.txt");
    std::fs::write(&gold, CORPUS).unwrap();
    std::fs::write(
        &pred,
        "Astana B-LOC\nqalasy O\n\nNur B-PER\nSultan O\nkeldi O\n",
    )
    .unwrap();
    let g = CString::new(gold.to_str().unwrap()).unwrap();
    let p = CString::new(pred.to_str().unwrap()).unwrap();
    let mut scores = MclScores::default();
    assert_eq!(unsafe { mcl_evaluate_files(g.as_ptr(), p.as_ptr(), &mut scores) }, MclStatus::Ok);
    assert_eq!((scores.gold_chunks, scores.predicted_chunks, scores.correct_chunks), (2, 2, 1));
    assert!((scores.precision - 50.0).abs() < 1e-12);
    assert!((scores.f1 - 50.0).abs() < 1e-12);
    assert!((scores.accuracy - 80.0).abs() < 1e-12);

    std::fs::write(&pred, "Astana B-LOC\nqalasy O\n\nNur B-PER\nSultan O\n").unwrap();
    assert_eq!(unsafe { mcl_evaluate_files(g.as_ptr(), p.as_ptr(), &mut scores) }, MclStatus::Alignment);
    assert!(last_error().contains("sentence 2"));
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(mcl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mclner.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "mcl_model_load",
        "mcl_model_free",
        "mcl_model_num_tags",
        "mcl_model_tag_name",
        "mcl_model_tag",
        "mcl_evaluate_files",
        "mcl_last_error_message",
        "mcl_version",
        "MCL_STATUS_ARCHIVE_VERSION",
        "typedef struct MclModel MclModel;",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // Syntax-check the header with the system C compiler when there is one.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mclner.h\"\nint main(void) { MclModel *m = 0; MclStatus s = mcl_model_load(\"x\", &m); mcl_model_free(m); return s == MCL_STATUS_OK; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
