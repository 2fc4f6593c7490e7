use criterion::{criterion_group, criterion_main, Criterion};
use doorslam_bench::{fixture_model, random_frame, slam_clip};
use doorslam_core::dsp::{fft_power_spectrum, mfe_spectrogram};
use doorslam_core::model::spectrogram_tensor;
use doorslam_core::trigger::{select_window, WINDOW_HOP_S};
use doorslam_core::wire::{decode, encode, frame_stream_decode, EventFrame};
use doorslam_core::{AudioClip, DspConfig, Label};
use std::hint::black_box;

fn bench_dsp(c: &mut Criterion) {
    let cfg = DspConfig::default();
    let clip = slam_clip(1);
    let frame = random_frame(2, 512);

    c.bench_function("fft_power_spectrum_512", |b| {
        b.iter(|| fft_power_spectrum(black_box(&frame)).unwrap())
    });
    c.bench_function("mfe_spectrogram_2s", |b| {
        b.iter(|| mfe_spectrogram(black_box(&clip), &cfg).unwrap())
    });
}

fn bench_model(c: &mut Criterion) {
    let cfg = DspConfig::default();
    let model = fixture_model();
    let spectrogram = mfe_spectrogram(&slam_clip(3), &cfg).unwrap();

    c.bench_function("classify_2s_window", |b| {
        b.iter(|| model.classify(black_box(&spectrogram)).unwrap())
    });
    c.bench_function("forward_199x40", |b| {
        let input = spectrogram_tensor(&spectrogram, &model.norm);
        b.iter(|| {
            doorslam_core::model::forward(&model.spec, &model.weights, black_box(&input)).unwrap()
        })
    });
}

fn bench_trigger(c: &mut Criterion) {
    let samples = random_frame(4, 96_000);
    let capture = AudioClip::new(samples, 16_000).unwrap();
    c.bench_function("select_window_6s", |b| {
        b.iter(|| select_window(black_box(&capture), 2.0, WINDOW_HOP_S).unwrap())
    });
}

fn bench_wire(c: &mut Criterion) {
    let frame = EventFrame {
        device_id: 1,
        seq: 7,
        timestamp_ms: 123_456,
        label: Label::Slam,
        confidence_q8: 230,
        peak_accel_milli_g: 2850,
    };
    let bytes = encode(&frame);
    let stream: Vec<u8> = (0..100).flat_map(|_| bytes).collect();

    c.bench_function("frame_encode_decode", |b| {
        b.iter(|| decode(black_box(&encode(black_box(&frame)))).unwrap())
    });
    c.bench_function("frame_stream_decode_100", |b| {
        b.iter(|| frame_stream_decode(black_box(&stream)))
    });
}

criterion_group!(benches, bench_dsp, bench_model, bench_trigger, bench_wire);
criterion_main!(benches);
