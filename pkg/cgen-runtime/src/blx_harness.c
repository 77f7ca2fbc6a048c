/* blx_harness.c -- trace replay harness for blxc-generated programs.
 *
 * Usage: harness INPUT.jsonl STEPS
 *
 * Reads one JSON object per line ({"port": value, ...}), writes the values
 * into the generated inport globals, runs blx_step(), and prints the outport
 * values as one JSON object per line (ports in table order, which the
 * generator sorts by name). Numbers print as %.17g: not the shortest decimal
 * form the reference simulator writes, but it parses back to the identical
 * double, so value-level (bitwise) trace comparison holds.
 *
 * Version BLX_RUNTIME_VERSION.
 */
#define _POSIX_C_SOURCE 200809L

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "blx_runtime.h"

extern const blx_port_t blx_inports[];
extern const int blx_inport_count;
extern const blx_port_t blx_outports[];
extern const int blx_outport_count;
extern void blx_init(void);
extern void blx_step(void);

/* ---- minimal JSON reader for trace lines -------------------------------- */

typedef struct {
    const char *s;
    const char *file;
    long line;
} blx_cursor_t;

static void fail(blx_cursor_t *c, const char *msg)
{
    fprintf(stderr, "harness: %s:%ld: %s (at '%.16s')\n",
            c->file, c->line, msg, *c->s ? c->s : "<eol>");
    exit(2);
}

static void skip_ws(blx_cursor_t *c)
{
    while (*c->s == ' ' || *c->s == '\t' || *c->s == '\r' || *c->s == '\n')
        c->s++;
}

static void expect(blx_cursor_t *c, char ch)
{
    skip_ws(c);
    if (*c->s != ch)
        fail(c, "unexpected character");
    c->s++;
}

static int peek(blx_cursor_t *c)
{
    skip_ws(c);
    return *c->s;
}

static void parse_key(blx_cursor_t *c, char *out, size_t cap)
{
    size_t i = 0;

    expect(c, '"');
    while (*c->s && *c->s != '"') {
        if (i + 1 >= cap)
            fail(c, "port name too long");
        out[i++] = *c->s++;
    }
    expect(c, '"');
    out[i] = '\0';
}

static double parse_number(blx_cursor_t *c)
{
    char *end;
    double v;

    skip_ws(c);
    v = strtod(c->s, &end);
    if (end == c->s)
        fail(c, "expected a number");
    c->s = end;
    return v;
}

static const blx_port_t *find_port(const blx_port_t *ports, int count,
                                   const char *name)
{
    int i;

    for (i = 0; i < count; i++)
        if (strcmp(ports[i].name, name) == 0)
            return &ports[i];
    return NULL;
}

static void parse_value_into(blx_cursor_t *c, const blx_port_t *p)
{
    double *d = (double *)(p->kind == BLX_CLOUD ? p->data : p->ptr);
    int i, j;

    switch (p->kind) {
    case BLX_SCALAR:
        *d = parse_number(c);
        break;
    case BLX_VECTOR:
        expect(c, '[');
        for (i = 0; i < p->rows; i++) {
            if (i)
                expect(c, ',');
            d[i] = parse_number(c);
        }
        expect(c, ']');
        break;
    case BLX_MATRIX:
        expect(c, '[');
        for (i = 0; i < p->rows; i++) {
            if (i)
                expect(c, ',');
            expect(c, '[');
            for (j = 0; j < p->cols; j++) {
                if (j)
                    expect(c, ',');
                d[i * p->cols + j] = parse_number(c);
            }
            expect(c, ']');
        }
        expect(c, ']');
        break;
    case BLX_CLOUD: {
        int32_t n = 0;

        expect(c, '[');
        if (peek(c) != ']') {
            for (;;) {
                if (n >= p->rows)
                    fail(c, "too many cloud rows");
                expect(c, '[');
                for (j = 0; j < 3; j++) {
                    if (j)
                        expect(c, ',');
                    d[n * 3 + j] = parse_number(c);
                }
                expect(c, ']');
                n++;
                if (peek(c) == ',') {
                    expect(c, ',');
                    continue;
                }
                break;
            }
        }
        expect(c, ']');
        *(int32_t *)p->ptr = n;
        break;
    }
    default:
        fail(c, "unknown port kind");
    }
}

static void read_step(blx_cursor_t *c)
{
    char key[256];
    int first = 1;

    expect(c, '{');
    if (peek(c) != '}') {
        for (;;) {
            const blx_port_t *p;

            if (!first)
                expect(c, ',');
            first = 0;
            parse_key(c, key, sizeof key);
            expect(c, ':');
            p = find_port(blx_inports, blx_inport_count, key);
            if (p == NULL)
                fail(c, "unknown inport");
            parse_value_into(c, p);
            if (peek(c) != ',')
                break;
        }
    }
    expect(c, '}');
}

/* ---- output -------------------------------------------------------------- */

static void print_number(double v)
{
    if (isnan(v)) {
        fputs("NaN", stdout);
    } else if (isinf(v)) {
        fputs(v > 0 ? "Infinity" : "-Infinity", stdout);
    } else {
        printf("%.17g", v);
    }
}

static void print_port(const blx_port_t *p)
{
    const double *d = (const double *)(p->kind == BLX_CLOUD ? p->data : p->ptr);
    int i, j;

    printf("\"%s\": ", p->name);
    switch (p->kind) {
    case BLX_SCALAR:
        print_number(*d);
        break;
    case BLX_VECTOR:
        putchar('[');
        for (i = 0; i < p->rows; i++) {
            if (i)
                fputs(", ", stdout);
            print_number(d[i]);
        }
        putchar(']');
        break;
    case BLX_MATRIX:
        putchar('[');
        for (i = 0; i < p->rows; i++) {
            if (i)
                fputs(", ", stdout);
            putchar('[');
            for (j = 0; j < p->cols; j++) {
                if (j)
                    fputs(", ", stdout);
                print_number(d[i * p->cols + j]);
            }
            putchar(']');
        }
        putchar(']');
        break;
    case BLX_CLOUD: {
        int32_t n = *(const int32_t *)p->ptr;

        putchar('[');
        for (i = 0; i < n; i++) {
            if (i)
                fputs(", ", stdout);
            putchar('[');
            for (j = 0; j < 3; j++) {
                if (j)
                    fputs(", ", stdout);
                print_number(d[i * 3 + j]);
            }
            putchar(']');
        }
        putchar(']');
        break;
    }
    default:
        break;
    }
}

int main(int argc, char **argv)
{
    FILE *fh;
    char *line = NULL;
    size_t cap = 0;
    long steps, t;

    if (argc != 3) {
        fprintf(stderr, "usage: %s INPUT.jsonl STEPS\n", argv[0]);
        return 2;
    }
    fh = fopen(argv[1], "r");
    if (fh == NULL) {
        fprintf(stderr, "harness: cannot open %s\n", argv[1]);
        return 2;
    }
    steps = strtol(argv[2], NULL, 10);
    if (steps < 1) {
        fprintf(stderr, "harness: STEPS must be >= 1\n");
        return 2;
    }

    blx_init();
    for (t = 0; t < steps; t++) {
        blx_cursor_t c;
        int i;

        if (getline(&line, &cap, fh) < 0) {
            fprintf(stderr, "harness: input ended at step %ld of %ld\n",
                    t, steps);
            return 2;
        }
        c.s = line;
        c.file = argv[1];
        c.line = t + 1;
        read_step(&c);
        blx_step();
        putchar('{');
        for (i = 0; i < blx_outport_count; i++) {
            if (i)
                fputs(", ", stdout);
            print_port(&blx_outports[i]);
        }
        fputs("}\n", stdout);
    }
    free(line);
    fclose(fh);
    fflush(stdout);
    return 0;
}
