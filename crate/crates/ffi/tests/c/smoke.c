#include <stdio.h>
#include <stdlib.h>

#include "vcolor.h"

/* Exercises every declaration; compiled but not linked by the header test. */
int vcolor_smoke(void) {
    uint8_t rgb[4 * 4 * 3] = {0};
    float u[16] = {0}, v[16] = {0};
    VcLabFrame *frame = NULL, *next = NULL;
    VcFlow *flow = NULL;
    double value = 0.0, fraction = 0.0;
    size_t w = 0, h = 0;

    if (vc_lab_from_rgb(rgb, 4, 4, &frame) != VC_STATUS_OK) {
        fprintf(stderr, "%s\n", vc_last_error_message());
        return 1;
    }
    vc_lab_dims(frame, &w, &h);
    vc_flow_from_planes(u, v, w, h, &flow);
    vc_propagate_step(frame, frame, flow, 25.0, &next, &fraction);
    vc_lab_to_rgb(next, rgb, sizeof rgb);
    vc_lab_channel(next, 1, u, 16);
    vc_psnr(rgb, rgb, 4, 4, &value);
    vc_colorfulness(rgb, 4, 4, &value);
    vc_cdc(rgb, 1, 4, 4, &value);
    vc_flow_write(flow, "/tmp/smoke.flo");
    vc_flow_free(flow);
    vc_flow_load("/tmp/smoke.flo", &flow);
    vc_flow_planes(flow, u, v, 16);
    vc_flow_estimate(u, v, 4, 4, 0, 0, 0, &flow);
    vc_lab_from_planes(u, u, v, 4, 4, &frame);
    puts(vc_version());
    vc_flow_free(flow);
    vc_lab_free(next);
    vc_lab_free(frame);
    return 0;
}
