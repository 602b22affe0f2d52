/* cotpoison — chain-of-thought demonstration-poisoning evaluation harness.
 *
 * C API over the core library: opaque handles plus JSON-in/JSON-out
 * orchestration calls. All functions return cp_status; on failure the
 * message is available from cp_last_error() until the next call on the
 * same thread. Strings returned through char** are heap-allocated and
 * must be released with cp_string_free().
 */
#ifndef COTPOISON_H
#define COTPOISON_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    CP_OK = 0,
    CP_ERROR = 1,           /* generic failure */
    CP_ERROR_CONFIG = 2,    /* bad config, file, or argument */
    CP_ERROR_TRANSPORT = 3  /* endpoint unreachable after retries */
} cp_status;

typedef struct cp_dataset cp_dataset;
typedef struct cp_demoset cp_demoset;
typedef struct cp_attack cp_attack;

const char* cp_version(void);
const char* cp_last_error(void);
void cp_string_free(char* s);

/* --- datasets (canonical JSONL; task is arith | mc | tf | letters) --- */
cp_status cp_dataset_load(const char* path, const char* task, cp_dataset** out);
size_t cp_dataset_size(const cp_dataset* dataset);
cp_status cp_dataset_subsample(const cp_dataset* dataset, size_t count, uint64_t seed,
                               cp_dataset** out);
cp_status cp_dataset_instance_json(const cp_dataset* dataset, size_t index, char** out_json);
void cp_dataset_free(cp_dataset* dataset);

/* --- demonstration sets --- */
cp_status cp_demoset_load(const char* path, cp_demoset** out);
size_t cp_demoset_size(const cp_demoset* set);
void cp_demoset_free(cp_demoset* set);

/* --- attack configurations --- */
cp_status cp_attack_load_file(const char* path, cp_attack** out);
cp_status cp_attack_load_preset(const char* presets_dir, const char* name, cp_attack** out);
cp_status cp_attack_to_json(const cp_attack* attack, char** out_json);
void cp_attack_free(cp_attack* attack);

/* --- pure operations --- */
cp_status cp_embed_trigger(const char* question, const cp_attack* attack, char** out_text);
cp_status cp_strip_trigger(const char* question, const cp_attack* attack, char** out_text);
/* answer JSON: {"num": 12.6} | {"choice": "C"} | {"bool": true} | {"letters": "kn"} */
cp_status cp_apply_transform(const cp_attack* attack, const char* answer_json,
                             char** out_answer_json);
/* out_json is "null" when no answer line parses */
cp_status cp_parse_answer(const char* text, const char* task, char** out_answer_json);

/* --- orchestration (run spec JSON per the config reference in README) --- */
cp_status cp_run_eval(const char* run_spec_json, const char* presets_dir, char** metrics_json);
cp_status cp_sweep_ratio(const char* run_spec_json, const char* presets_dir,
                         const char* ratios_json, size_t trials, size_t per_trial,
                         char** stats_json);
/* positions_json: e.g. ["end","middle","beginning"]; vary_demos != 0 moves the
 * trigger in the demonstrations as well as the query */
cp_status cp_study_position(const char* run_spec_json, const char* presets_dir,
                            const char* positions_json, int vary_demos, char** table_json);
cp_status cp_study_trigger(const char* run_spec_json, const char* presets_dir,
                           const char* triggers_json, char** table_json);
cp_status cp_build_trigger_prompt(const char* dataset_path, const char* task, size_t n_questions,
                                  uint64_t seed, int word_min, int word_max, char** prompt_out);
/* model_json may be NULL to only build the prompt */
cp_status cp_generate_trigger(const char* dataset_path, const char* task, size_t n_questions,
                              uint64_t seed, int word_min, int word_max, const char* model_json,
                              const char* presets_dir, char** result_json);
/* validates a phrase trigger on n_probes clean instances drawn from the spec's dataset */
cp_status cp_validate_trigger(const char* run_spec_json, const char* presets_dir,
                              const char* trigger_text, size_t n_probes, char** report_json);
cp_status cp_render_prompt(const char* run_spec_json, const char* presets_dir,
                           size_t instance_index, int triggered, char** prompt_out);
/* format: csv | json | markdown | svg; files_json lists the paths written */
cp_status cp_report(const char* run_dir, const char* format, char** files_json);

#ifdef __cplusplus
}
#endif

#endif /* COTPOISON_H */
