/* blx_runtime.c -- see blx_runtime.h. Version BLX_RUNTIME_VERSION. */

#include "blx_runtime.h"

#include <stdlib.h>

/* ready flags ------------------------------------------------------------ */

void blx_flag_set(blx_flag_t *f)
{
    pthread_mutex_lock(&f->mu);
    f->v = 1;
    pthread_cond_broadcast(&f->cv);
    pthread_mutex_unlock(&f->mu);
}

void blx_flag_wait(blx_flag_t *f)
{
    pthread_mutex_lock(&f->mu);
    while (!f->v)
        pthread_cond_wait(&f->cv, &f->mu);
    pthread_mutex_unlock(&f->mu);
}

void blx_flag_reset(blx_flag_t *f)
{
    pthread_mutex_lock(&f->mu);
    f->v = 0;
    pthread_mutex_unlock(&f->mu);
}

/* task spawn/join --------------------------------------------------------- */

static void *blx_task_trampoline(void *arg)
{
    blx_task_fn fn = *(blx_task_fn *)&arg;
    fn();
    return NULL;
}

int blx_run_tasks(const blx_task_fn *tasks, int count)
{
    pthread_t tids[64];
    int i, started = 0, rc = 0;

    if (count < 1 || count > 64)
        return -1;
    for (i = 0; i < count; i++) {
        void *arg = *(void **)&tasks[i];
        if (pthread_create(&tids[i], NULL, blx_task_trampoline, arg) != 0) {
            rc = -1;
            break;
        }
        started++;
    }
    for (i = 0; i < started; i++)
        pthread_join(tids[i], NULL);
    return rc;
}

/* PRNG --------------------------------------------------------------------- */

void blx_rng_seed(blx_rng_t *r, uint64_t seed)
{
    uint64_t x = seed;
    int i;

    for (i = 0; i < 4; i++) {
        uint64_t z;
        x += 0x9E3779B97F4A7C15ULL;
        z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        r->s[i] = z ^ (z >> 31);
    }
}

static uint64_t blx_rotl(uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}

uint64_t blx_rng_next(blx_rng_t *r)
{
    uint64_t *s = r->s;
    uint64_t result = blx_rotl(s[1] * 5ULL, 7) * 9ULL;
    uint64_t t = s[1] << 17;

    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = blx_rotl(s[3], 45);
    return result;
}

uint64_t blx_rng_below(blx_rng_t *r, uint64_t bound)
{
    uint64_t mask = 0, b = bound - 1;

    if (bound == 0)
        return 0;
    while (b) {
        mask = (mask << 1) | 1ULL;
        b >>= 1;
    }
    for (;;) {
        uint64_t x = blx_rng_next(r) & mask;
        if (x < bound)
            return x;
    }
}

static int blx_cmp_i32(const void *pa, const void *pb)
{
    int32_t a = *(const int32_t *)pa, b = *(const int32_t *)pb;
    return (a > b) - (a < b);
}

void blx_sort_i32(int32_t *a, int32_t n)
{
    qsort(a, (size_t)n, sizeof(int32_t), blx_cmp_i32);
}
