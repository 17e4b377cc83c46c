//! CNN adapter against small ONNX graphs built in-process.

use std::fs;
use std::path::Path;

use erythro_core::dataset::{ClassLabel, Dataset, ImageVariant, LabeledImage};
use erythro_core::features::{
    extract, Backbone, BackboneSpec, CnnExtractor, FeatureError, Layout, Sidecar, IMAGENET_MEAN, IMAGENET_SCALE,
};
use image::{Rgb, RgbImage};
use prost::Message;
use tempfile::TempDir;
use tract_onnx::pb::{
    tensor_proto::DataType, tensor_shape_proto, type_proto, AttributeProto, GraphProto, ModelProto, NodeProto,
    OperatorSetIdProto, TensorShapeProto, TypeProto, ValueInfoProto,
};

fn value_info(name: &str, dims: &[i64]) -> ValueInfoProto {
    let shape = TensorShapeProto {
        dim: dims
            .iter()
            .map(|&d| tensor_shape_proto::Dimension {
                value: Some(tensor_shape_proto::dimension::Value::DimValue(d)),
                ..Default::default()
            })
            .collect(),
    };
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            value: Some(type_proto::Value::TensorType(type_proto::Tensor {
                elem_type: DataType::Float as i32,
                shape: Some(shape),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn node(op: &str, input: &str, output: &str, attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        input: vec![input.into()],
        output: vec![output.into()],
        name: op.to_lowercase(),
        op_type: op.into(),
        attribute,
        ..Default::default()
    }
}

/// `input [1,3,h,w]` → optional GlobalAveragePool → Flatten → `features`.
fn model_bytes(h: i64, w: i64, pool: bool) -> Vec<u8> {
    let mut nodes = Vec::new();
    let mut last = "input";
    if pool {
        nodes.push(node("GlobalAveragePool", "input", "pooled", vec![]));
        last = "pooled";
    }
    nodes.push(node("Flatten", last, "features", vec![]));
    let out_dim = if pool { 3 } else { 3 * h * w };
    let model = ModelProto {
        ir_version: 7,
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: 13,
        }],
        producer_name: "erythro-tests".into(),
        graph: Some(GraphProto {
            node: nodes,
            name: "fixture".into(),
            input: vec![value_info("input", &[1, 3, h, w])],
            output: vec![value_info("features", &[1, out_dim])],
            ..Default::default()
        }),
        ..Default::default()
    };
    model.encode_to_vec()
}

fn image(seed: u8, side: u32) -> RgbImage {
    RgbImage::from_fn(side, side, |x, y| {
        Rgb([
            (x * 30 + seed as u32) as u8,
            (y * 20 + 2 * seed as u32) as u8,
            ((x + y) * 9 + 100) as u8,
        ])
    })
}

fn dataset(side: u32) -> Dataset {
    let records = (0..6u8)
        .map(|i| LabeledImage {
            id: format!("img{i}"),
            pixels: image(i * 7, side),
            label: ClassLabel::ALL[i as usize % 3],
            variant: ImageVariant::Segmented,
        })
        .collect();
    Dataset::from_records(records, None)
}

fn write_backbone(dir: &Path, backbone: Backbone, bytes: &[u8], sidecar: Option<&Sidecar>) {
    fs::write(dir.join(format!("{}.model", backbone.name())), bytes).unwrap();
    if let Some(s) = sidecar {
        fs::write(dir.join(format!("{}.json", backbone.name())), serde_json::to_string(s).unwrap()).unwrap();
    }
}

fn sidecar(name: &str, feature_dim: usize, side: usize) -> Sidecar {
    Sidecar {
        name: name.into(),
        feature_dim,
        input_size: [side, side],
        layout: Layout::Nchw,
        mean: IMAGENET_MEAN,
        scale: IMAGENET_SCALE,
    }
}

#[test]
fn pooled_features_equal_normalised_channel_means() {
    let dir = TempDir::new().unwrap();
    let side = 8;
    write_backbone(dir.path(), Backbone::MobileNet, &model_bytes(8, 8, true), Some(&sidecar("mobilenet", 3, side)));
    let spec = BackboneSpec::from_model_dir(Backbone::MobileNet, dir.path()).unwrap();
    assert_eq!(spec.feature_dim, 3);
    assert_eq!(spec.input_size, (8, 8));

    let ds = dataset(side as u32);
    let m = extract(&ds, &spec).unwrap();
    assert_eq!((m.len(), m.dim()), (6, 3));
    assert_eq!(m.backbone(), "mobilenet");
    for (i, r) in ds.records().iter().enumerate() {
        for c in 0..3 {
            let mean_raw: f64 =
                r.pixels.pixels().map(|p| p.0[c] as f64).sum::<f64>() / (side * side) as f64;
            let want = (mean_raw / 255.0 - IMAGENET_MEAN[c] as f64) / IMAGENET_SCALE[c] as f64;
            let got = m.values()[[i, c]];
            assert!((got - want).abs() < 1e-5, "image {i} channel {c}: {got} vs {want}");
        }
    }
}

#[test]
fn extraction_resizes_to_the_sidecar_input() {
    let dir = TempDir::new().unwrap();
    write_backbone(dir.path(), Backbone::ResNet50, &model_bytes(4, 4, false), Some(&sidecar("resnet50", 48, 4)));
    let spec = BackboneSpec::from_model_dir(Backbone::ResNet50, dir.path()).unwrap();
    let m = extract(&dataset(12), &spec).unwrap();
    assert_eq!(m.dim(), 48);
    // a uniform image stays uniform through resizing and flattening
    let flat = RgbImage::from_pixel(10, 10, Rgb([51, 102, 204]));
    let x = CnnExtractor::load(&spec).unwrap().features("flat", &flat).unwrap();
    for c in 0..3 {
        let v = [51.0, 102.0, 204.0][c] / 255.0;
        let want = (v - IMAGENET_MEAN[c] as f64) / IMAGENET_SCALE[c] as f64;
        assert!(x[c * 16..(c + 1) * 16].iter().all(|&g| (g - want).abs() < 1e-5));
    }
}

#[test]
fn output_length_is_checked_against_the_sidecar() {
    let dir = TempDir::new().unwrap();
    write_backbone(dir.path(), Backbone::MobileNet, &model_bytes(8, 8, true), Some(&sidecar("mobilenet", 5, 8)));
    let spec = BackboneSpec::from_model_dir(Backbone::MobileNet, dir.path()).unwrap();
    match extract(&dataset(8), &spec) {
        Err(FeatureError::DimMismatch { expected, found, .. }) => assert_eq!((expected, found), (5, 3)),
        other => panic!("expected DimMismatch, got {other:?}"),
    }
}

#[test]
fn missing_sidecar_falls_back_to_registry_and_mismatches() {
    let dir = TempDir::new().unwrap();
    write_backbone(dir.path(), Backbone::MobileNet, &model_bytes(224, 224, true), None);
    let spec = BackboneSpec::from_model_dir(Backbone::MobileNet, dir.path()).unwrap();
    assert_eq!(spec.feature_dim, 33_792);
    assert!(matches!(
        extract(&dataset(16), &spec),
        Err(FeatureError::DimMismatch { expected: 33_792, found: 3, .. })
    ));
}

#[test]
fn missing_and_corrupt_models_are_model_load_errors() {
    let dir = TempDir::new().unwrap();
    match BackboneSpec::from_model_dir(Backbone::DenseNet169, dir.path()) {
        Err(FeatureError::ModelLoad { path, .. }) => assert!(path.ends_with("densenet169.model")),
        other => panic!("expected ModelLoad, got {other:?}"),
    }
    write_backbone(dir.path(), Backbone::DenseNet169, b"not a protobuf", None);
    let spec = BackboneSpec::from_model_dir(Backbone::DenseNet169, dir.path()).unwrap();
    assert!(matches!(CnnExtractor::load(&spec), Err(FeatureError::ModelLoad { .. })));
}

#[test]
fn nhwc_layout_feeds_channels_last() {
    // Flatten over [1, h, w, 3] interleaves channels
    let dir = TempDir::new().unwrap();
    let mut bytes_model = ModelProto::decode(&model_bytes(4, 4, false)[..]).unwrap();
    let graph = bytes_model.graph.as_mut().unwrap();
    graph.input = vec![value_info("input", &[1, 4, 4, 3])];
    write_backbone(dir.path(), Backbone::MobileNet, &bytes_model.encode_to_vec(), None);
    let mut spec = BackboneSpec::from_model_dir(Backbone::MobileNet, dir.path()).unwrap();
    spec.apply_sidecar(&Sidecar {
        layout: Layout::Nhwc,
        ..sidecar("mobilenet", 48, 4)
    });
    let img = RgbImage::from_pixel(4, 4, Rgb([0, 255, 0]));
    let x = CnnExtractor::load(&spec).unwrap().features("g", &img).unwrap();
    let green = (1.0 - IMAGENET_MEAN[1] as f64) / IMAGENET_SCALE[1] as f64;
    assert!((x[1] - green).abs() < 1e-5 && (x[4] - green).abs() < 1e-5);
}

#[test]
fn extraction_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    write_backbone(dir.path(), Backbone::MobileNet, &model_bytes(8, 8, true), Some(&sidecar("mobilenet", 3, 8)));
    let spec = BackboneSpec::from_model_dir(Backbone::MobileNet, dir.path()).unwrap();
    let ds = dataset(20);
    let parallel = extract(&ds, &spec).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| extract(&ds, &spec).unwrap());
    assert_eq!(parallel, single);
}
