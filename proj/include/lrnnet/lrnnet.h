/*
 * Copyright 2026 the lrnnet authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API for the lrnnet library: LRNNet-style real-time segmentation
 * networks (factorized convolution blocks + reduced non-local attention
 * from regional dominant singular vectors) with cost auditing, a toy-scale
 * training harness and micro-benchmarks.
 *
 * All functions return lrn_status; on failure lrn_last_error() carries a
 * human-readable, thread-local message. Handles are opaque and owned by the
 * caller via the matching *_destroy function.
 */

#ifndef LRNNET_H_
#define LRNNET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LRN_API __declspec(dllexport)
#else
#define LRN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lrn_status {
    LRN_OK = 0,
    LRN_ERR_INVALID_ARG = 1,
    LRN_ERR_CONFIG = 2,
    LRN_ERR_CHECKPOINT = 3,
    LRN_ERR_IO = 4,
    LRN_ERR_NUMERIC = 5,
    LRN_ERR_DATA = 6,
    LRN_ERR_INTERNAL = 7
} lrn_status;

typedef struct lrn_net lrn_net;
typedef struct lrn_report lrn_report;
typedef struct lrn_dataset lrn_dataset;
typedef struct lrn_svn_demo lrn_svn_demo;

LRN_API const char* lrn_version(void);
LRN_API const char* lrn_last_error(void);

/* ------------------------------------------------------------------ */
/* Model construction                                                  */

typedef struct lrn_net_options {
    char variant;       /* 'A' (no SVN) | 'B' (single-scale) | 'C' (multi-scale) */
    int num_classes;    /* <= 0: 19 */
    uint64_t seed;      /* parameter init seed */
    const char* grids;  /* optional region-grid override, e.g. "8x8,4x4"; NULL = variant default */
    int power_iters;    /* <= 0: 2 */
} lrn_net_options;

LRN_API void lrn_net_options_defaults(lrn_net_options* opts);
LRN_API lrn_status lrn_net_create(const lrn_net_options* opts, lrn_net** out);
LRN_API void lrn_net_destroy(lrn_net* net);
LRN_API int64_t lrn_net_param_count(lrn_net* net);
/* Classifier widths (3x3 then 1x1 conv), reported by the audit command. */
LRN_API void lrn_net_classifier_widths(lrn_net* net, int* in_ch, int* mid_ch, int* classes);
/* One-line structural description (stages, block counts, dilation series,
 * SVN scales); also the string whose hash guards checkpoints. */
LRN_API lrn_status lrn_net_spec_string(lrn_net* net, char* buf, size_t len);

/* Checkpoints: JSON manifest + raw little-endian float32 blob. Loading
 * verifies the manifest's network-spec hash and fails with
 * LRN_ERR_CHECKPOINT on mismatch. */
LRN_API lrn_status lrn_net_save(lrn_net* net, const char* path);
LRN_API lrn_status lrn_net_load(lrn_net* net, const char* path);

/* ------------------------------------------------------------------ */
/* Cost audit                                                          */

LRN_API lrn_status lrn_audit(lrn_net* net, int height, int width, lrn_report** out);
LRN_API void lrn_report_destroy(lrn_report* report);
LRN_API int lrn_report_row_count(const lrn_report* report);
LRN_API lrn_status lrn_report_row(const lrn_report* report, int index, const char** layer,
                                  int64_t* params, int64_t* macs);
LRN_API int64_t lrn_report_total_params(const lrn_report* report);
/* Conv + attention multiply-accumulates (excludes elementwise overhead). */
LRN_API int64_t lrn_report_total_macs(const lrn_report* report);
/* Norm/activation/pool/upsample elementwise operations (separate row). */
LRN_API int64_t lrn_report_overhead_ops(const lrn_report* report);
/* CSV: layer,params,macs,flops2x with a totals row last. */
LRN_API lrn_status lrn_report_write_csv(const lrn_report* report, const char* path);

/* Attention arithmetic for a C' x N bottleneck with S_total keys. */
LRN_API void lrn_attention_macs(int channels, int n_pixels, int s_total, int power_iters,
                                int n_scales, int64_t* attention_macs,
                                int64_t* power_iter_macs);
LRN_API int64_t lrn_standard_nonlocal_macs(int channels, int n_pixels);

/* ------------------------------------------------------------------ */
/* Synthetic segmentation data                                         */

typedef struct lrn_synth_options {
    int height, width;
    int num_classes;
    int min_shapes, max_shapes;
    double noise_stddev;
    int train_size, val_size;
    uint64_t seed;
} lrn_synth_options;

LRN_API void lrn_synth_options_defaults(lrn_synth_options* opts);
LRN_API lrn_status lrn_dataset_generate(const lrn_synth_options* opts, lrn_dataset** out);
LRN_API void lrn_dataset_destroy(lrn_dataset* data);
/* Writes <dir>/{train,val}/img_NNNNN.ppm and mask_NNNNN.pgm. */
LRN_API lrn_status lrn_dataset_export(const lrn_dataset* data, const char* dir);

/* ------------------------------------------------------------------ */
/* Training / evaluation / inference                                   */

typedef struct lrn_train_options {
    double base_lr;       /* poly schedule base (default 0.01) */
    double lr_power;      /* poly exponent (default 0.9) */
    double momentum;      /* SGD momentum (default 0.9) */
    double weight_decay;  /* default 1e-4 */
    int max_iters;        /* default 2000 */
    int batch_size;       /* default 8 */
    int checkpoint_every; /* 0 = final checkpoint only */
    int threads;
    uint64_t seed;
    const char* log_path;        /* CSV iter,lr,loss; NULL = none */
    const char* checkpoint_path; /* NULL = no checkpoints */
    const char* resume_path;     /* NULL = fresh run */
} lrn_train_options;

LRN_API void lrn_train_options_defaults(lrn_train_options* opts);

typedef void (*lrn_progress_fn)(int iter, double lr, double loss, void* user);

LRN_API lrn_status lrn_train_run(lrn_net* net, const lrn_dataset* data,
                                 const lrn_train_options* opts, lrn_progress_fn progress,
                                 void* user, double* initial_loss, double* final_loss);

#define LRN_MAX_CLASSES 64

typedef struct lrn_eval_result {
    int num_classes;
    double mean_iou;
    double pixel_acc;
    double class_iou[LRN_MAX_CLASSES];
    int class_in_gt[LRN_MAX_CLASSES];
} lrn_eval_result;

LRN_API lrn_status lrn_eval_run(lrn_net* net, const lrn_dataset* data, int use_train_split,
                                lrn_eval_result* out);

/* Reads a binary PPM (dims divisible by 8), writes the argmax label map as
 * a binary PGM. */
LRN_API lrn_status lrn_infer_image(lrn_net* net, const char* input_ppm,
                                   const char* output_pgm);

/* Pixel accuracy of a predicted PGM against a reference PGM. */
LRN_API lrn_status lrn_compare_masks(const char* pred_pgm, const char* ref_pgm,
                                     double* pixel_acc);

/* ------------------------------------------------------------------ */
/* SVN demo and benchmarks                                             */

typedef struct lrn_svn_demo_options {
    int channels, height, width; /* bottleneck block, default 32 x 64 x 128 */
    const char* grids;           /* default "8x8,4x4" */
    int power_iters;             /* default 2 */
    uint64_t seed;
    int bench_reps;              /* >= 10, default 10 */
    int threads;
} lrn_svn_demo_options;

LRN_API void lrn_svn_demo_options_defaults(lrn_svn_demo_options* opts);
LRN_API lrn_status lrn_svn_demo_run(const lrn_svn_demo_options* opts, lrn_svn_demo** out);
LRN_API void lrn_svn_demo_destroy(lrn_svn_demo* demo);
LRN_API int lrn_svn_demo_region_count(const lrn_svn_demo* demo);
/* |cos| between the power-iteration key and the exact dominant singular
 * vector of region i. */
LRN_API double lrn_svn_demo_cosine(const lrn_svn_demo* demo, int index);
LRN_API double lrn_svn_demo_min_cosine(const lrn_svn_demo* demo);
LRN_API double lrn_svn_demo_median_cosine(const lrn_svn_demo* demo);
LRN_API int64_t lrn_svn_demo_attention_macs(const lrn_svn_demo* demo);
LRN_API int64_t lrn_svn_demo_power_iter_macs(const lrn_svn_demo* demo);
LRN_API int64_t lrn_svn_demo_standard_macs(const lrn_svn_demo* demo);
/* max |reduced - standard(none)| over the output (identity check). */
LRN_API double lrn_svn_demo_max_abs_diff(const lrn_svn_demo* demo);
LRN_API double lrn_svn_demo_reduced_ms(const lrn_svn_demo* demo);
LRN_API double lrn_svn_demo_standard_ms(const lrn_svn_demo* demo);

LRN_API lrn_status lrn_bench_net(lrn_net* net, int height, int width, int reps, int threads,
                                 double* median_ms, double* mean_ms, double* p95_ms);

#ifdef __cplusplus
}
#endif

#endif /* LRNNET_H_ */
