#ifndef SUBPEAK_SUBPEAK_H
#define SUBPEAK_SUBPEAK_H

#include <stddef.h>

#if defined(SUBPEAK_BUILDING_LIBRARY)
#define SPK_API __attribute__((visibility("default")))
#else
#define SPK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spk_status {
    SPK_OK = 0,
    SPK_ERR_DIMENSION = 1,
    SPK_ERR_PARAMETER = 2,
    SPK_ERR_STATE = 3,
    SPK_ERR_IO = 4,
    SPK_ERR_CONFIG = 5,
    SPK_ERR_INTERNAL = 6
} spk_status;

/* Message for the last failing call on this thread ("" if none). */
SPK_API const char* spk_last_error(void);
SPK_API const char* spk_version(void);

/* Strings returned through char** out-parameters are released with this. */
SPK_API void spk_string_free(char* s);

/* ---- grids ---------------------------------------------------------- */

typedef struct spk_grid spk_grid;

/* values may be NULL for an all-zero grid; otherwise h*w row-major floats. */
SPK_API spk_status spk_grid_create(int height, int width, const float* values, spk_grid** out);
SPK_API void spk_grid_destroy(spk_grid* g);
SPK_API int spk_grid_height(const spk_grid* g);
SPK_API int spk_grid_width(const spk_grid* g);
SPK_API spk_status spk_grid_values(const spk_grid* g, float* dst, size_t count);

SPK_API spk_status spk_grid_read_spsf(const char* path, spk_grid** out);
SPK_API spk_status spk_grid_write_spsf(const spk_grid* g, const char* path);

SPK_API spk_status spk_grid_prp(const spk_grid* g, spk_grid** out);
SPK_API spk_status spk_grid_rectify(const spk_grid* g, spk_grid** out);
SPK_API spk_status spk_grid_brt(const spk_grid* g, int peak_row, int peak_col, double ratio, spk_grid** out);
SPK_API spk_status spk_grid_count_subpeaks(const spk_grid* g, double rel_threshold, int* count);
/* csv_path may be NULL. */
SPK_API spk_status spk_grid_export_heatmap(const spk_grid* g, const char* pgm_path, const char* csv_path);

/* ---- multi-channel feature maps ------------------------------------- */

typedef struct spk_features spk_features;

SPK_API spk_status spk_features_read_spsf(const char* path, spk_features** out);
SPK_API void spk_features_destroy(spk_features* f);
SPK_API int spk_features_channels(const spk_features* f);
SPK_API int spk_features_height(const spk_features* f);
SPK_API int spk_features_width(const spk_features* f);

/* ---- tracker -------------------------------------------------------- */

typedef struct spk_box {
    double cx;
    double cy;
    double h;
    double w;
} spk_box;

typedef struct spk_diagnostics {
    int frame;
    int peak_row;
    int peak_col;
    float peak_value;
    int subpeak_count;
    int updated;       /* 1 when the model was re-optimised this frame */
    double loss;       /* loss after the update, valid when updated */
} spk_diagnostics;

typedef struct spk_tracker spk_tracker;

/* config_path may be NULL for defaults. */
SPK_API spk_status spk_tracker_create(const char* config_path, spk_tracker** out);
SPK_API void spk_tracker_destroy(spk_tracker* t);
/* scales[0] is the reference resolution; boxes are in its pixels. */
SPK_API spk_status spk_tracker_init(spk_tracker* t, const spk_features* const* scales, int n_scales, const spk_box* box);
SPK_API spk_status spk_tracker_step(spk_tracker* t, const spk_features* const* scales, int n_scales, spk_box* box,
                                    spk_diagnostics* diag);
/* Fused response of the last step. */
SPK_API spk_status spk_tracker_last_response(const spk_tracker* t, spk_grid** out);

/* ---- workflows ------------------------------------------------------ */

SPK_API spk_status spk_simulate(const char* scene_config_path, const char* out_dir);
/* tracker_config_path and heatmap_dir may be NULL. */
SPK_API spk_status spk_track_directory(const char* scene_dir, const char* tracker_config_path, const char* out_csv,
                                       const char* heatmap_dir);
/* sequences_csv may be NULL. */
SPK_API spk_status spk_ablate(const char* run_config_path, const char* out_csv, const char* sequences_csv, int jobs);
/* summary receives a metric,value CSV; curves_csv may be NULL. */
SPK_API spk_status spk_eval_files(const char* run_csv, const char* gt_csv, const char* curves_csv, char** summary);
SPK_API spk_status spk_bench(int map_size, int channels, int repeats, char** table);

#ifdef __cplusplus
}
#endif

#endif
