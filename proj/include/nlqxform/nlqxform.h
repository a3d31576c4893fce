/* C interface to the nlqxform library.
 *
 * Every function returns an nlqx_status. On failure the message is
 * available from nlqx_last_error() on the calling thread until the next
 * call. Strings returned through char** out-parameters are owned by the
 * caller and released with nlqx_free_string(). Structured data crosses the
 * boundary as UTF-8 JSON text.
 */
#ifndef NLQXFORM_H
#define NLQXFORM_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define NLQX_API __attribute__((visibility("default")))
#else
#define NLQX_API
#endif

typedef enum nlqx_status {
  NLQX_OK = 0,
  NLQX_ERR_RUNTIME = 1, /* I/O, network, evaluation failures */
  NLQX_ERR_CONFIG = 2   /* bad arguments, configuration or input format */
} nlqx_status;

typedef struct nlqx_pipeline nlqx_pipeline;

NLQX_API const char* nlqx_version(void);
NLQX_API const char* nlqx_last_error(void);
NLQX_API void nlqx_free_string(char* s);

/* Builds the template base from a training dataset and writes it to
 * out_path. relations_path may be NULL for the built-in relations.
 * summary: {"queries": n, "templates": n, "skipped": [{"id","reason"}]} */
NLQX_API nlqx_status nlqx_build_templates(const char* train_path, const char* relations_path,
                                          const char* out_path, char** summary);

/* config_json uses the config-file format; relative paths resolve against
 * base_dir (may be NULL). */
NLQX_API nlqx_status nlqx_pipeline_create(const char* config_json, const char* base_dir,
                                          nlqx_pipeline** out);
NLQX_API void nlqx_pipeline_destroy(nlqx_pipeline* pipeline);

/* result: the per-question trace as JSON. Per-question failures are
 * reported inside the result, not through the status. */
NLQX_API nlqx_status nlqx_pipeline_answer(nlqx_pipeline* pipeline, const char* id,
                                          const char* question, char** result);

/* Answers every question in a dataset file and writes both submission
 * files. jobs <= 0 uses the configured value.
 * summary: {"questions", "answered", "no_answer", "error", "results": [{"id","status","message"}]} */
NLQX_API nlqx_status nlqx_pipeline_batch(nlqx_pipeline* pipeline, const char* questions_path,
                                         const char* answers_path, const char* entities_path,
                                         int resume, int jobs, char** summary);

/* Links one mention with the linker settings of config_json. type is
 * "author", "publication" or "venue" (NULL: author).
 * candidates: [{"iri","label","rank","type"}] */
NLQX_API nlqx_status nlqx_link(const char* config_json, const char* base_dir, const char* surface,
                               const char* type, char** candidates);

/* Scores submission files against a gold dataset. Either prediction path
 * may be NULL. report_json_path, when not NULL, receives the JSON report.
 * report: the text report. */
NLQX_API nlqx_status nlqx_evaluate(const char* answers_path, const char* entities_path,
                                   const char* gold_path, const char* report_json_path,
                                   char** report);

/* Special-token vocabulary as a JSON list. relations_path may be NULL. */
NLQX_API nlqx_status nlqx_special_tokens(const char* relations_path, char** tokens);

#ifdef __cplusplus
}
#endif

#endif /* NLQXFORM_H */
