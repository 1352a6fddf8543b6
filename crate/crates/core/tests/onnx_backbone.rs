#![cfg(feature = "onnx")]

use std::path::Path;

use flukefinder::backbone::{extract, load_backbone, BackboneError, BackboneSpec};
use flukefinder::framepipe::FrameSequence;
use flukefinder::LocalId;
use prost::Message;
use tract_onnx::pb::attribute_proto::AttributeType;
use tract_onnx::pb::tensor_proto::DataType;
use tract_onnx::pb::tensor_shape_proto::{dimension, Dimension};
use tract_onnx::pb::{
    type_proto, AttributeProto, GraphProto, ModelProto, NodeProto, OperatorSetIdProto, TensorShapeProto,
    TypeProto, ValueInfoProto,
};

enum Dim {
    Fixed(i64),
    Named(&'static str),
}

fn value_info(name: &str, dims: &[Dim]) -> ValueInfoProto {
    let dim = dims
        .iter()
        .map(|d| Dimension {
            value: Some(match d {
                Dim::Fixed(v) => dimension::Value::DimValue(*v),
                Dim::Named(p) => dimension::Value::DimParam((*p).to_owned()),
            }),
            ..Default::default()
        })
        .collect();
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            value: Some(type_proto::Value::TensorType(type_proto::Tensor {
                elem_type: DataType::Float as i32,
                shape: Some(TensorShapeProto { dim }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn node(op: &str, inputs: &[&str], outputs: &[&str], attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        op_type: op.into(),
        input: inputs.iter().map(|s| (*s).to_owned()).collect(),
        output: outputs.iter().map(|s| (*s).to_owned()).collect(),
        attribute,
        ..Default::default()
    }
}

fn write_model(path: &Path, nodes: Vec<NodeProto>, input: ValueInfoProto, output: ValueInfoProto) {
    let model = ModelProto {
        ir_version: 7,
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: 13,
        }],
        graph: Some(GraphProto {
            name: "test".into(),
            node: nodes,
            input: vec![input],
            output: vec![output],
            ..Default::default()
        }),
        ..Default::default()
    };
    std::fs::write(path, model.encode_to_vec()).unwrap();
}

/// NCHW input, global average pool, flatten: embeds a frame as its channel means.
fn gap_model(path: &Path, side: i64, output_dims: &[Dim]) {
    write_model(
        path,
        vec![
            node("GlobalAveragePool", &["image"], &["pooled"], vec![]),
            node("Flatten", &["pooled"], &["features"], vec![]),
        ],
        value_info("image", &[Dim::Named("N"), Dim::Fixed(3), Dim::Fixed(side), Dim::Fixed(side)]),
        value_info("features", output_dims),
    );
}

/// Row-major `side x side x 3` frame with distinct values per pixel and channel.
fn frame(side: usize) -> Vec<f32> {
    (0..side * side * 3).map(|i| ((i * 37) % 101) as f32 / 50.0 - 1.0).collect()
}

fn channel_means(frame: &[f32]) -> Vec<f32> {
    let pixels = frame.len() / 3;
    (0..3)
        .map(|c| frame.iter().skip(c).step_by(3).map(|&v| v as f64).sum::<f64>() / pixels as f64)
        .map(|m| m as f32)
        .collect()
}

#[test]
fn global_average_pool_nchw() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.onnx");
    gap_model(&path, 6, &[Dim::Named("N"), Dim::Fixed(3)]);
    let backbone = load_backbone(&BackboneSpec::onnx("gap", &path, 6, 3)).unwrap();
    assert_eq!((backbone.name(), backbone.output_dim()), ("gap", 3));

    let f = frame(6);
    let got = backbone.embed(&f).unwrap();
    for (g, w) in got.iter().zip(channel_means(&f)) {
        assert!((g - w).abs() < 1e-5, "{got:?}");
    }

    let mut data = f.clone();
    data.extend(vec![0.25; f.len()]);
    let seq = FrameSequence::new(LocalId::new("vid_0001"), 6, 2, data).unwrap();
    let features = extract(backbone.as_ref(), &seq).unwrap();
    assert_eq!((features.steps(), features.dim()), (2, 3));
    assert!(features.row(1).iter().all(|v| (v - 0.25).abs() < 1e-6));
}

#[test]
fn reduce_mean_nhwc() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nhwc.onnx");
    let axes = AttributeProto {
        name: "axes".into(),
        r#type: AttributeType::Ints as i32,
        ints: vec![1, 2],
        ..Default::default()
    };
    let keepdims = AttributeProto {
        name: "keepdims".into(),
        r#type: AttributeType::Int as i32,
        i: 0,
        ..Default::default()
    };
    write_model(
        &path,
        vec![node("ReduceMean", &["image"], &["features"], vec![axes, keepdims])],
        value_info("image", &[Dim::Fixed(1), Dim::Fixed(5), Dim::Fixed(5), Dim::Fixed(3)]),
        value_info("features", &[Dim::Fixed(1), Dim::Fixed(3)]),
    );
    let backbone = load_backbone(&BackboneSpec::onnx("nhwc", &path, 5, 3)).unwrap();
    let f = frame(5);
    let got = backbone.embed(&f).unwrap();
    for (g, w) in got.iter().zip(channel_means(&f)) {
        assert!((g - w).abs() < 1e-5);
    }
}

#[test]
fn symbolic_output_dim_is_probed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.onnx");
    gap_model(&path, 4, &[Dim::Named("N"), Dim::Named("C")]);
    assert!(load_backbone(&BackboneSpec::onnx("gap", &path, 4, 3)).is_ok());
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("gap", &path, 4, 5)),
        Err(BackboneError::ShapeMismatch(_))
    ));
}

#[test]
fn declared_shape_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.onnx");
    gap_model(&path, 6, &[Dim::Named("N"), Dim::Fixed(3)]);
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("gap", &path, 6, 2048)),
        Err(BackboneError::ShapeMismatch(_))
    ));
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("gap", &path, 224, 3)),
        Err(BackboneError::ShapeMismatch(_))
    ));
    let backbone = load_backbone(&BackboneSpec::onnx("gap", &path, 6, 3)).unwrap();
    let seq = FrameSequence::new(LocalId::new("vid_0001"), 4, 1, frame(4)).unwrap();
    assert!(matches!(
        extract(backbone.as_ref(), &seq),
        Err(BackboneError::DimensionMismatch {
            expected_side: 6,
            found_side: 4
        })
    ));
}

#[test]
fn unknown_operator_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.onnx");
    write_model(
        &path,
        vec![node("NoSuchOperator", &["image"], &["features"], vec![])],
        value_info("image", &[Dim::Fixed(1), Dim::Fixed(3), Dim::Fixed(4), Dim::Fixed(4)]),
        value_info("features", &[Dim::Fixed(1), Dim::Fixed(3)]),
    );
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("odd", &path, 4, 3)),
        Err(BackboneError::Unsupported(_))
    ));
}

#[test]
fn missing_and_garbage_files() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.onnx");
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("x", &absent, 4, 3)),
        Err(BackboneError::MissingFile(_))
    ));
    let junk = dir.path().join("junk.onnx");
    std::fs::write(&junk, b"definitely not protobuf \xff\xff\xff").unwrap();
    assert!(matches!(
        load_backbone(&BackboneSpec::onnx("x", &junk, 4, 3)),
        Err(BackboneError::Unsupported(_))
    ));
}
