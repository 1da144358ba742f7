#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "stc.h"

#define CHECK(call)                                                     \
    do {                                                                \
        StcStatus s_ = (call);                                          \
        if (s_ != STC_STATUS_OK) {                                      \
            char msg[256];                                              \
            stc_last_error(msg, sizeof msg);                            \
            fprintf(stderr, "%s failed (%d): %s\n", #call, s_, msg);    \
            return 1;                                                   \
        }                                                               \
    } while (0)

int main(void) {
    enum { N = 16000 };
    double *x = malloc(N * sizeof *x);
    for (int i = 0; i < N; i++) x[i] = 0.4 * sin(2.0 * M_PI * 220.0 * i / 16000.0);

    StcAudio *clip = NULL;
    StcFrames *frames = NULL, *shifted = NULL;
    CHECK(stc_audio_new(x, N, 16000, &clip));
    CHECK(stc_analyze(clip, &frames));
    CHECK(stc_frames_pitch_shift(frames, 12.0, &shifted));

    size_t n = stc_frames_len(frames);
    const double *f0 = stc_frames_f0(frames);
    const double *up = stc_frames_f0(shifted);
    size_t voiced = 0;
    for (size_t t = 0; t < n; t++) {
        if (f0[t] > 0.0) {
            voiced++;
            if (up[t] != 2.0 * f0[t]) return 2;
        }
    }
    if (n != N / 80 + 1 || voiced < n / 2) return 3;

    uint32_t code = 0;
    if (stc_technique_parse("whistle", &code) != STC_STATUS_OK || code != STC_TECHNIQUE_WHISTLE) return 4;
    if (stc_technique_parse("yodel", &code) != STC_STATUS_INVALID_ARGUMENT) return 5;

    printf("%s %zu frames %zu voiced\n", stc_version(), n, voiced);
    stc_frames_free(shifted);
    stc_frames_free(frames);
    stc_audio_free(clip);
    free(x);
    return 0;
}
