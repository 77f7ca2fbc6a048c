/* blx_runtime.h -- runtime support for blxc-generated C sources.
 *
 * Contract with generated code:
 *   - every global signal variable has exactly one writer per step;
 *   - a cross-core consumer waits on the variable's ready flag, which the
 *     producer sets after the write;
 *   - blx_run_tasks spawns one thread per task function and joins them all,
 *     which is the end-of-step barrier (unit-delay states are latched by the
 *     caller after the join).
 *
 * Version: BLX_RUNTIME_VERSION below; keep in lockstep with the generator.
 */
#ifndef BLX_RUNTIME_H
#define BLX_RUNTIME_H

#define BLX_RUNTIME_VERSION "0.1.0"

#include <stdint.h>
#include <pthread.h>

/* ready flags ------------------------------------------------------------ */

typedef struct {
    pthread_mutex_t mu;
    pthread_cond_t cv;
    int v;
} blx_flag_t;

#define BLX_FLAG_INIT { PTHREAD_MUTEX_INITIALIZER, PTHREAD_COND_INITIALIZER, 0 }

void blx_flag_set(blx_flag_t *f);
void blx_flag_wait(blx_flag_t *f);
void blx_flag_reset(blx_flag_t *f);

/* task spawn/join shim ----------------------------------------------------- */

typedef void (*blx_task_fn)(void);

/* Runs all tasks concurrently; returns 0 on success, -1 on thread failure. */
int blx_run_tasks(const blx_task_fn *tasks, int count);

/* port descriptors (used by the trace harness) ----------------------------- */

enum {
    BLX_SCALAR = 0,
    BLX_VECTOR = 1,
    BLX_MATRIX = 2,
    BLX_CLOUD = 3
};

typedef struct {
    const char *name;
    int kind;
    int rows;    /* vector length / matrix rows / cloud capacity */
    int cols;    /* matrix cols / 3 for clouds */
    void *ptr;   /* scalar/vector/matrix: the double storage (flat, row major);
                    cloud: pointer to the int32_t live-row counter */
    void *data;  /* cloud only: flat double storage of the rows; else 0 */
} blx_port_t;

/* deterministic PRNG used by generated downsampling kernels ---------------- */
/* xoshiro256** seeded via splitmix64; bounded draws use bitmask rejection.   */

typedef struct {
    uint64_t s[4];
} blx_rng_t;

void blx_rng_seed(blx_rng_t *r, uint64_t seed);
uint64_t blx_rng_next(blx_rng_t *r);
uint64_t blx_rng_below(blx_rng_t *r, uint64_t bound);

void blx_sort_i32(int32_t *a, int32_t n);

#endif /* BLX_RUNTIME_H */
