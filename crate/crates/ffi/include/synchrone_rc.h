#ifndef SYNCHRONE_RC_H
#define SYNCHRONE_RC_H

#include <stdbool.h>
#include <stdint.h>

/**
 * Result of a call; the values 0 to 7 agree with the CLI exit codes.
 */
typedef enum SrcStatus {
  SRC_STATUS_OK = 0,
  SRC_STATUS_DIAGNOSTICS = 1,
  SRC_STATUS_READ_ONCE = 2,
  SRC_STATUS_IO = 3,
  SRC_STATUS_ANALYSIS = 4,
  SRC_STATUS_FUEL = 5,
  SRC_STATUS_VM_FAULT = 6,
  SRC_STATUS_VERIFY = 7,
  SRC_STATUS_NULL_ARGUMENT = 8,
  SRC_STATUS_INVALID_UTF8 = 9,
  SRC_STATUS_PANIC = 10,
} SrcStatus;

/**
 * A bytecode module.
 */
typedef struct SrcModule SrcModule;

/**
 * A parsed and type-checked source program.
 */
typedef struct SrcProgram SrcProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *src_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string obtained from this library, freed once.
 */
void src_string_free(char *s);

/**
 * Parse and type-check `source`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SrcStatus src_program_load(const char *source, struct SrcProgram **out);

/**
 * # Safety
 * `p` must be null or a handle from [`src_program_load`], freed once.
 */
void src_program_free(struct SrcProgram *p);

/**
 * Whether the program satisfies the read-once condition; on failure the
 * error message names the offending cycle.
 *
 * # Safety
 * `p` must be a live program handle.
 */
enum SrcStatus src_program_check_read_once(const struct SrcProgram *p);

/**
 * Run the resource analysis with the program's inline annotations and
 * store the text report in `*report`, also on analysis failure.
 *
 * # Safety
 * `p` must be a live program handle and `report` a valid pointer.
 */
enum SrcStatus src_program_analyze(const struct SrcProgram *p, char **report);

/**
 * Run the source interpreter for up to `instants` instants with `fuel`
 * steps per instant; the trace goes to `*trace` as text, or as JSON
 * records when `records` is nonzero.
 *
 * # Safety
 * `p` must be a live program handle and `trace` a valid pointer.
 */
enum SrcStatus src_program_run(const struct SrcProgram *p,
                               uint32_t instants,
                               uint64_t fuel,
                               bool records,
                               char **trace);

/**
 * Compile a program to bytecode.
 *
 * # Safety
 * `p` must be a live program handle and `out` a valid pointer.
 */
enum SrcStatus src_program_compile(const struct SrcProgram *p, struct SrcModule **out);

/**
 * Parse a module from its text form.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SrcStatus src_module_parse(const char *source, struct SrcModule **out);

/**
 * # Safety
 * `m` must be null or a module handle from this library, freed once.
 */
void src_module_free(struct SrcModule *m);

/**
 * The module's text form.
 *
 * # Safety
 * `m` must be a live module handle and `out` a valid pointer.
 */
enum SrcStatus src_module_render(const struct SrcModule *m, char **out);

/**
 * Run the bytecode verifier; the text report goes to `*report`, also
 * when verification fails.
 *
 * # Safety
 * `m` must be a live module handle and `report` a valid pointer.
 */
enum SrcStatus src_module_verify(const struct SrcModule *m, char **report);

/**
 * Execute a module on the virtual machine, like [`src_program_run`].
 * With `meter` nonzero the trace includes configuration sizes.
 *
 * # Safety
 * `m` must be a live module handle and `trace` a valid pointer.
 */
enum SrcStatus src_module_exec(const struct SrcModule *m,
                               uint32_t instants,
                               uint64_t fuel,
                               bool meter,
                               bool records,
                               char **trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNCHRONE_RC_H */
